#include "memrw/checkpoint.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <limits>

#include "memrw/error.hpp"

namespace memrw {
namespace {

constexpr std::array<char, 5> kMagic = {'M', 'E', 'M', 'R', 'W'};
// Guards allocations driven by corrupt length fields.
constexpr std::uint64_t kMaxCount = std::uint64_t{1} << 32;

template <class U>
void put_uint(std::ostream& out, U v) {
  std::array<char, sizeof(U)> b{};
  for (std::size_t i = 0; i < sizeof(U); ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.write(b.data(), b.size());
}

void put_f64(std::ostream& out, double v) { put_uint(out, std::bit_cast<std::uint64_t>(v)); }

void put_str(std::ostream& out, const std::string& s) {
  put_uint<std::uint64_t>(out, s.size());
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

class Reader {
 public:
  explicit Reader(std::istream& in) : in_(in) {}

  void bytes(char* dst, std::size_t n) {
    in_.read(dst, static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in_.gcount()) != n) {
      throw Error(ErrorCode::kFormat, "checkpoint truncated");
    }
  }

  template <class U>
  U uint() {
    std::array<char, sizeof(U)> b{};
    bytes(b.data(), b.size());
    U v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) {
      v |= static_cast<U>(static_cast<unsigned char>(b[i])) << (8 * i);
    }
    return v;
  }

  double f64() { return std::bit_cast<double>(uint<std::uint64_t>()); }

  std::uint64_t count() {
    const auto n = uint<std::uint64_t>();
    if (n > kMaxCount) throw Error(ErrorCode::kFormat, "checkpoint length field out of range");
    return n;
  }

  std::string str() {
    std::string s(count(), '\0');
    bytes(s.data(), s.size());
    return s;
  }

 private:
  std::istream& in_;
};

}  // namespace

ModelKind parse_model_kind(const std::string& s) {
  if (s == "retrieval") return ModelKind::kRetrieval;
  if (s == "pointer") return ModelKind::kPointer;
  if (s == "pointer_no_memory") return ModelKind::kPointerNoMemory;
  throw Error(ErrorCode::kConfig, "config error: unknown model kind '" + s + "'");
}

std::string to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::kRetrieval: return "retrieval";
    case ModelKind::kPointer: return "pointer";
    case ModelKind::kPointerNoMemory: return "pointer_no_memory";
  }
  return "unknown";
}

const NamedArray* Checkpoint::find(const std::string& name) const {
  for (const auto& a : arrays) {
    if (a.name == name) return &a;
  }
  return nullptr;
}

void write_checkpoint(std::ostream& out, const Checkpoint& ckpt) {
  out.write(kMagic.data(), kMagic.size());
  put_uint(out, ckpt.format_version);
  put_uint(out, static_cast<std::uint32_t>(ckpt.kind));
  put_uint(out, ckpt.seed);
  put_uint(out, ckpt.epochs_completed);
  put_str(out, ckpt.config_json);
  put_str(out, ckpt.trace_json);
  put_uint<std::uint64_t>(out, ckpt.merges.size());
  for (const auto& m : ckpt.merges) {
    put_str(out, m.left);
    put_str(out, m.right);
  }
  put_uint<std::uint64_t>(out, ckpt.symbols.size());
  for (const auto& s : ckpt.symbols) put_str(out, s);
  put_uint<std::uint64_t>(out, ckpt.generation_words.size());
  for (const auto& w : ckpt.generation_words) put_str(out, w);
  put_uint<std::uint64_t>(out, ckpt.arrays.size());
  for (const auto& a : ckpt.arrays) {
    put_str(out, a.name);
    put_uint<std::uint64_t>(out, static_cast<std::uint64_t>(a.value.rows()));
    put_uint<std::uint64_t>(out, static_cast<std::uint64_t>(a.value.cols()));
    const double* p = a.value.data();
    for (Eigen::Index i = 0; i < a.value.size(); ++i) put_f64(out, p[i]);
  }
  if (!out) throw Error(ErrorCode::kIo, "checkpoint write failed");
}

Checkpoint read_checkpoint(std::istream& in) {
  Reader r(in);
  std::array<char, 5> magic{};
  r.bytes(magic.data(), magic.size());
  if (magic != kMagic) throw Error(ErrorCode::kFormat, "not a checkpoint (bad magic)");
  Checkpoint c;
  c.format_version = r.uint<std::uint32_t>();
  if (c.format_version != kCheckpointVersion) {
    throw Error(ErrorCode::kFormat,
                "unsupported checkpoint version " + std::to_string(c.format_version));
  }
  const auto kind = r.uint<std::uint32_t>();
  if (kind > static_cast<std::uint32_t>(ModelKind::kPointerNoMemory)) {
    throw Error(ErrorCode::kFormat, "unknown model kind " + std::to_string(kind));
  }
  c.kind = static_cast<ModelKind>(kind);
  c.seed = r.uint<std::uint64_t>();
  c.epochs_completed = r.uint<std::uint32_t>();
  c.config_json = r.str();
  c.trace_json = r.str();
  const auto n_merges = r.count();
  for (std::uint64_t i = 0; i < n_merges; ++i) {
    subword::MergeRule m;
    m.left = r.str();
    m.right = r.str();
    m.rank = static_cast<int>(i);
    c.merges.push_back(std::move(m));
  }
  const auto n_symbols = r.count();
  for (std::uint64_t i = 0; i < n_symbols; ++i) c.symbols.push_back(r.str());
  const auto n_words = r.count();
  for (std::uint64_t i = 0; i < n_words; ++i) c.generation_words.push_back(r.str());
  const auto n_arrays = r.count();
  for (std::uint64_t i = 0; i < n_arrays; ++i) {
    NamedArray a;
    a.name = r.str();
    const auto rows = r.count();
    const auto cols = r.count();
    if (rows * cols > kMaxCount) throw Error(ErrorCode::kFormat, "checkpoint array too large");
    a.value.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    double* p = a.value.data();
    for (Eigen::Index k = 0; k < a.value.size(); ++k) p[k] = r.f64();
    c.arrays.push_back(std::move(a));
  }
  if (in.peek() != std::char_traits<char>::eof()) {
    throw Error(ErrorCode::kFormat, "trailing bytes after checkpoint");
  }
  return c;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  write_checkpoint(out, ckpt);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  return read_checkpoint(in);
}

}  // namespace memrw
