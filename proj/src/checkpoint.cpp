#include "lamner/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include "lamner/error.hpp"

namespace lamner {

namespace {

constexpr char kMagic[8] = {'L', 'A', 'M', 'N', 'E', 'R', 'C', 'K'};

template <typename U>
void put_uint(std::string& out, U v) {
  for (std::size_t i = 0; i < sizeof(U); ++i) {
    out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
  }
}

class Reader {
 public:
  explicit Reader(const std::string& bytes) : bytes_(bytes) {}

  template <typename U>
  U uint() {
    need(sizeof(U));
    U v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) {
      v |= static_cast<U>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    }
    pos_ += sizeof(U);
    return v;
  }

  std::string take(std::size_t n) {
    need(n);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw Error("checkpoint truncated");
  }
  const std::string& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

Checkpoint Checkpoint::capture(ModelKind kind, std::string metadata,
                               const nn::ParamList& params) {
  Checkpoint ck;
  ck.kind = kind;
  ck.metadata = std::move(metadata);
  for (const nn::Param* p : params) ck.blobs.push_back({p->name, p->value});
  return ck;
}

void Checkpoint::restore(const nn::ParamList& params) const {
  std::map<std::string, const Matrix*> by_name;
  for (const Blob& b : blobs) by_name[b.name] = &b.value;
  for (nn::Param* p : params) {
    auto it = by_name.find(p->name);
    if (it == by_name.end()) throw Error("checkpoint is missing parameter " + p->name);
    const Matrix& m = *it->second;
    if (m.rows() != p->value.rows() || m.cols() != p->value.cols()) {
      throw DimensionError("checkpoint parameter " + p->name + " has shape " +
                           std::to_string(m.rows()) + "x" + std::to_string(m.cols()) +
                           ", model expects " + std::to_string(p->value.rows()) + "x" +
                           std::to_string(p->value.cols()));
    }
    p->value = m;
    p->grad = Matrix(m.rows(), m.cols());
  }
}

std::string Checkpoint::serialize() const {
  std::string out(kMagic, sizeof(kMagic));
  put_uint<std::uint32_t>(out, kVersion);
  put_uint<std::uint32_t>(out, static_cast<std::uint32_t>(kind));
  put_uint<std::uint64_t>(out, metadata.size());
  out += metadata;
  put_uint<std::uint32_t>(out, static_cast<std::uint32_t>(blobs.size()));
  for (const Blob& b : blobs) {
    put_uint<std::uint32_t>(out, static_cast<std::uint32_t>(b.name.size()));
    out += b.name;
    put_uint<std::uint64_t>(out, b.value.rows());
    put_uint<std::uint64_t>(out, b.value.cols());
    for (double v : b.value.data()) put_uint<std::uint64_t>(out, std::bit_cast<std::uint64_t>(v));
  }
  return out;
}

Checkpoint Checkpoint::deserialize(const std::string& bytes) {
  Reader in(bytes);
  if (in.take(sizeof(kMagic)) != std::string(kMagic, sizeof(kMagic))) {
    throw Error("not a checkpoint file (bad magic)");
  }
  const auto version = in.uint<std::uint32_t>();
  if (version != kVersion) throw Error("unsupported checkpoint version " + std::to_string(version));
  Checkpoint ck;
  const auto kind = in.uint<std::uint32_t>();
  if (kind < 1 || kind > 3) throw Error("unknown model kind " + std::to_string(kind));
  ck.kind = static_cast<ModelKind>(kind);
  ck.metadata = in.take(in.uint<std::uint64_t>());
  const auto count = in.uint<std::uint32_t>();
  for (std::uint32_t i = 0; i < count; ++i) {
    Blob b;
    b.name = in.take(in.uint<std::uint32_t>());
    const auto rows = in.uint<std::uint64_t>();
    const auto cols = in.uint<std::uint64_t>();
    if (rows * cols > (bytes.size() / 8)) throw Error("checkpoint blob " + b.name + " truncated");
    b.value = Matrix(rows, cols);
    for (double& v : b.value.data()) v = std::bit_cast<double>(in.uint<std::uint64_t>());
    ck.blobs.push_back(std::move(b));
  }
  if (!in.done()) throw Error("trailing bytes after checkpoint blobs");
  return ck;
}

void Checkpoint::save(const std::filesystem::path& path) const {
  write_file_atomic(path, serialize());
}

Checkpoint Checkpoint::load(const std::filesystem::path& path) {
  return deserialize(read_file(path));
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file_atomic(const std::filesystem::path& path, const std::string& contents) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + tmp.string());
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) throw Error("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace lamner
