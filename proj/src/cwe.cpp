#include "mdaforge/cwe.hpp"

#include <algorithm>
#include <cctype>

#include "mdaforge/error.hpp"

namespace mdaforge {

namespace {
using G = CweGroup;
}

const std::array<CweRegistry::Entry, CweRegistry::kSize> CweRegistry::kEntries = {{
    {"CWE-36", G::kInputValidation},   {"CWE-390", G::kInputValidation}, {"CWE-391", G::kInputValidation},
    {"CWE-459", G::kInputValidation},  {"CWE-789", G::kInputValidation},

    {"CWE-78", G::kCodeInjection},     {"CWE-363", G::kCodeInjection},   {"CWE-543", G::kCodeInjection},
    {"CWE-839", G::kCodeInjection},

    {"CWE-41", G::kAuthentication},    {"CWE-89", G::kAuthentication},   {"CWE-209", G::kAuthentication},
    {"CWE-252", G::kAuthentication},   {"CWE-400", G::kAuthentication},  {"CWE-584", G::kAuthentication},
    {"CWE-834", G::kAuthentication},   {"CWE-835", G::kAuthentication},

    {"CWE-23", G::kConfiguration},     {"CWE-190", G::kConfiguration},   {"CWE-412", G::kConfiguration},
    {"CWE-832", G::kConfiguration},

    {"CWE-191", G::kBuffer},           {"CWE-195", G::kBuffer},          {"CWE-196", G::kBuffer},
    {"CWE-197", G::kBuffer},           {"CWE-367", G::kBuffer},          {"CWE-674", G::kBuffer},
    {"CWE-764", G::kBuffer},           {"CWE-765", G::kBuffer},          {"CWE-820", G::kBuffer},
    {"CWE-821", G::kBuffer},           {"CWE-833", G::kBuffer},

    {"CWE-88", G::kMiscellaneous},     {"CWE-774", G::kMiscellaneous},   {"CWE-194", G::kMiscellaneous},
    {"CWE-253", G::kMiscellaneous},    {"CWE-369", G::kMiscellaneous},   {"CWE-414", G::kMiscellaneous},
    {"CWE-460", G::kMiscellaneous},    {"CWE-564", G::kMiscellaneous},   {"CWE-567", G::kMiscellaneous},
    {"CWE-606", G::kMiscellaneous},    {"CWE-609", G::kMiscellaneous},   {"CWE-663", G::kMiscellaneous},
}};

const CweRegistry& CweRegistry::standard() {
  static const CweRegistry registry;
  return registry;
}

std::string_view CweRegistry::id(int index) const {
  if (index < 0 || static_cast<std::size_t>(index) >= kSize) {
    throw Error("CWE index " + std::to_string(index) + " out of range");
  }
  return kEntries[static_cast<std::size_t>(index)].id;
}

CweGroup CweRegistry::group(int index) const {
  id(index);
  return kEntries[static_cast<std::size_t>(index)].group;
}

std::optional<int> CweRegistry::index_of(std::string_view id) const {
  const auto it = std::find_if(kEntries.begin(), kEntries.end(), [&](const Entry& e) { return e.id == id; });
  if (it == kEntries.end()) return std::nullopt;
  return static_cast<int>(it - kEntries.begin());
}

CweLabel CweRegistry::label(std::string_view id) const {
  const auto idx = index_of(id);
  if (!idx) throw CorpusError("unknown CWE id '" + std::string(id) + "'");
  return {std::string(id), *idx};
}

bool CweRegistry::well_formed(std::string_view id) {
  if (id.size() <= 4 || id.substr(0, 4) != "CWE-") return false;
  return std::all_of(id.begin() + 4, id.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); });
}

}  // namespace mdaforge
