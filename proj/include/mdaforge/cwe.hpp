#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>

namespace mdaforge {

/// Defect category groups used to organize the label registry.
enum class CweGroup {
  kInputValidation,
  kCodeInjection,
  kAuthentication,
  kConfiguration,
  kBuffer,
  kMiscellaneous,
};

struct CweLabel {
  std::string id;  // "CWE-89"
  int index = 0;   // position in the registry, [0, K)

  friend bool operator==(const CweLabel&, const CweLabel&) = default;
};

/// The fixed 44-category label set. Indices follow the registry order and are
/// stable; they are what the classifier's output columns mean.
class CweRegistry {
 public:
  static constexpr std::size_t kSize = 44;

  static const CweRegistry& standard();

  std::size_t size() const { return kSize; }
  std::string_view id(int index) const;
  CweGroup group(int index) const;
  std::optional<int> index_of(std::string_view id) const;
  /// Throws CorpusError("unknown CWE id ...") when `id` is not registered.
  CweLabel label(std::string_view id) const;

  /// True if `id` looks like "CWE-<digits>".
  static bool well_formed(std::string_view id);

 private:
  struct Entry {
    std::string_view id;
    CweGroup group;
  };
  static const std::array<Entry, kSize> kEntries;
};

}  // namespace mdaforge
