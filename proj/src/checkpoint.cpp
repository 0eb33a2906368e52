#include "mdaforge/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "mdaforge/error.hpp"

namespace mdaforge {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace {

constexpr char kMagic[8] = {'M', 'D', 'A', 'F', 'C', 'K', 'P', 'T'};

template <class T>
void put(std::ostream& out, T value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof value);
}

template <class T>
T get(std::istream& in, const std::string& what) {
  T value{};
  if (!in.read(reinterpret_cast<char*>(&value), sizeof value)) throw Error("checkpoint truncated reading " + what);
  return value;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const ModelBundle& model, nlohmann::json header) {
  model.check_shapes();
  header["dims"] = model.dims.to_json();
  header["seed"] = model.seed;
  const std::string text = header.dump();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write checkpoint " + path.string());
  out.write(kMagic, sizeof kMagic);
  put<std::uint32_t>(out, kCheckpointVersion);
  put<std::uint64_t>(out, text.size());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const Matrix* p : model.parameters()) {
    put<std::uint64_t>(out, p->rows());
    put<std::uint64_t>(out, p->cols());
    out.write(reinterpret_cast<const char*>(p->data()), static_cast<std::streamsize>(p->size() * sizeof(double)));
  }
  if (!out) throw Error("write failed for checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open checkpoint " + path.string());
  char magic[8];
  if (!in.read(magic, sizeof magic) || std::memcmp(magic, kMagic, sizeof magic) != 0) {
    throw Error(path.string() + " is not a checkpoint file");
  }
  const auto version = get<std::uint32_t>(in, "version");
  if (version != kCheckpointVersion) {
    throw Error("unsupported checkpoint version " + std::to_string(version));
  }
  const auto header_len = get<std::uint64_t>(in, "header length");
  std::string text(header_len, '\0');
  if (!in.read(text.data(), static_cast<std::streamsize>(header_len))) throw Error("checkpoint truncated in header");

  Checkpoint ck;
  try {
    ck.header = nlohmann::json::parse(text);
    ck.model.dims = ModelDims::from_json(ck.header.at("dims"));
    ck.model.seed = ck.header.at("seed").get<std::uint64_t>();
  } catch (const nlohmann::json::exception& e) {
    throw Error("checkpoint header: " + std::string(e.what()));
  }
  for (const auto& p : ck.model.parameters()) {
    const auto rows = get<std::uint64_t>(in, p.name);
    const auto cols = get<std::uint64_t>(in, p.name);
    *p.value = Matrix(rows, cols);
    if (!in.read(reinterpret_cast<char*>(p.value->data()), static_cast<std::streamsize>(rows * cols * sizeof(double)))) {
      throw Error("checkpoint truncated in " + p.name);
    }
  }
  ck.model.check_shapes();
  return ck;
}

}  // namespace mdaforge
