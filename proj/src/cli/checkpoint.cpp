#include "ecl/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>

namespace ecl::cli {

namespace {

constexpr char kMagic[8] = {'E', 'C', 'L', 'C', 'K', 'P', 'T', '\x01'};

void put_u32(std::ostream& out, std::uint32_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}
void put_u64(std::ostream& out, std::uint64_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}
void put_string(std::ostream& out, const std::string& s) {
  put_u32(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}
void put_matrix(std::ostream& out, const Matrix& m) {
  put_u32(out, static_cast<std::uint32_t>(m.rows));
  put_u32(out, static_cast<std::uint32_t>(m.cols));
  out.write(reinterpret_cast<const char*>(m.data.data()),
            static_cast<std::streamsize>(m.data.size() * sizeof(double)));
}

std::uint32_t get_u32(std::istream& in) {
  std::uint32_t v = 0;
  in.read(reinterpret_cast<char*>(&v), sizeof(v));
  if (!in) throw std::runtime_error("checkpoint: truncated file");
  return v;
}
std::uint64_t get_u64(std::istream& in) {
  std::uint64_t v = 0;
  in.read(reinterpret_cast<char*>(&v), sizeof(v));
  if (!in) throw std::runtime_error("checkpoint: truncated file");
  return v;
}
std::string get_string(std::istream& in) {
  const std::uint32_t n = get_u32(in);
  std::string s(n, '\0');
  in.read(s.data(), n);
  if (!in) throw std::runtime_error("checkpoint: truncated file");
  return s;
}
Matrix get_matrix(std::istream& in) {
  const int rows = static_cast<int>(get_u32(in));
  const int cols = static_cast<int>(get_u32(in));
  Matrix m(rows, cols);
  in.read(reinterpret_cast<char*>(m.data.data()),
          static_cast<std::streamsize>(m.data.size() * sizeof(double)));
  if (!in) throw std::runtime_error("checkpoint: truncated file");
  return m;
}

}  // namespace

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path);
  out.write(kMagic, sizeof(kMagic));
  put_string(out, ckpt.config_text);
  put_string(out, ckpt.arm);
  put_u64(out, ckpt.seed);
  put_u32(out, static_cast<std::uint32_t>(ckpt.params.input_dim));
  put_u32(out, static_cast<std::uint32_t>(ckpt.params.hidden));
  put_u32(out, static_cast<std::uint32_t>(ckpt.params.classes));
  put_string(out, to_string(ckpt.params.paradigm));

  const auto tensors = ckpt.params.all();
  const auto names = model::MlpParameters::names();
  put_u32(out, static_cast<std::uint32_t>(tensors.size()));
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    put_string(out, names[i]);
    put_matrix(out, *tensors[i]);
  }

  put_u32(out, static_cast<std::uint32_t>(ckpt.ledger_tensors.size()));
  for (const auto& [name, m] : ckpt.ledger_tensors) {
    put_string(out, name);
    put_matrix(out, m);
  }
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw std::runtime_error("checkpoint: bad magic in " + path);

  Checkpoint ckpt;
  ckpt.config_text = get_string(in);
  ckpt.arm = get_string(in);
  ckpt.seed = get_u64(in);
  ckpt.params.input_dim = static_cast<int>(get_u32(in));
  ckpt.params.hidden = static_cast<int>(get_u32(in));
  ckpt.params.classes = static_cast<int>(get_u32(in));
  ckpt.params.paradigm = paradigm_from_string(get_string(in));

  const std::uint32_t tensor_count = get_u32(in);
  const auto names = model::MlpParameters::names();
  if (tensor_count != names.size())
    throw std::runtime_error("checkpoint: unexpected tensor count");
  auto tensors = ckpt.params.all();
  for (std::uint32_t i = 0; i < tensor_count; ++i) {
    const std::string name = get_string(in);
    if (name != names[i]) throw std::runtime_error("checkpoint: tensor order mismatch");
    *tensors[i] = get_matrix(in);
  }

  const std::uint32_t ledger_count = get_u32(in);
  for (std::uint32_t i = 0; i < ledger_count; ++i) {
    std::string name = get_string(in);
    ckpt.ledger_tensors.emplace_back(std::move(name), get_matrix(in));
  }
  return ckpt;
}

}  // namespace ecl::cli
