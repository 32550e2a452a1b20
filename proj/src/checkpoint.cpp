#include "checkpoint.hpp"

#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "error.hpp"

namespace tunes {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace {

constexpr char kMagic[8] = {'T', 'F', 'C', 'K', 'P', 'T', '0', '1'};

std::uint64_t fnv1a(const char* p, std::size_t n) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::size_t i = 0; i < n; ++i) {
    h ^= static_cast<unsigned char>(p[i]);
    h *= 0x100000001b3ULL;
  }
  return h;
}

template <typename U>
void put(std::string& out, U v) {
  char buf[sizeof(U)];
  std::memcpy(buf, &v, sizeof(U));
  out.append(buf, sizeof(U));
}

class Reader {
 public:
  explicit Reader(const std::string& bytes, std::size_t end) : bytes_(bytes), end_(end) {}

  template <typename U>
  U get() {
    need(sizeof(U));
    U v;
    std::memcpy(&v, bytes_.data() + pos_, sizeof(U));
    pos_ += sizeof(U);
    return v;
  }

  std::string str(std::size_t n) {
    need(n);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  void floats(float* dst, std::size_t n) {
    need(n * sizeof(float));
    std::memcpy(dst, bytes_.data() + pos_, n * sizeof(float));
    pos_ += n * sizeof(float);
  }

  bool done() const { return pos_ == end_; }

 private:
  void need(std::size_t n) const {
    if (end_ - pos_ < n) throw Error(Errc::BadCheckpoint, "container truncated");
  }
  const std::string& bytes_;
  std::size_t end_;
  std::size_t pos_ = 0;
};

}  // namespace

const NamedTensor* Container::find(const std::string& name) const {
  for (const auto& t : tensors) {
    if (t.name == name) return &t;
  }
  return nullptr;
}

std::string format_meta(const Meta& meta) {
  std::string s;
  for (const auto& [k, v] : meta) {
    if (k.find_first_of("=\n") != std::string::npos || v.find('\n') != std::string::npos) {
      throw Error(Errc::InvalidArgument, "meta entry '" + k + "' cannot contain '=' in the key or a newline");
    }
    s += k + "=" + v + "\n";
  }
  return s;
}

Meta parse_meta(const std::string& text) {
  Meta m;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw Error(Errc::BadCheckpoint, "meta line without '=': " + line);
    m[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return m;
}

std::string encode_container(const Container& c) {
  std::string out(kMagic, sizeof kMagic);
  put<std::uint32_t>(out, kCheckpointVersion);
  const std::string meta = format_meta(c.meta);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(meta.size()));
  out += meta;
  put<std::uint32_t>(out, static_cast<std::uint32_t>(c.tensors.size()));
  for (const auto& t : c.tensors) {
    std::size_t n = 1;
    for (auto d : t.shape) n *= d;
    if (n != t.data.size()) throw Error(Errc::ShapeMismatch, "tensor '" + t.name + "' shape does not match its data");
    put<std::uint32_t>(out, static_cast<std::uint32_t>(t.name.size()));
    out += t.name;
    put<std::uint32_t>(out, static_cast<std::uint32_t>(t.shape.size()));
    for (auto d : t.shape) put<std::uint32_t>(out, d);
    out.append(reinterpret_cast<const char*>(t.data.data()), t.data.size() * sizeof(float));
  }
  put<std::uint64_t>(out, fnv1a(out.data(), out.size()));
  return out;
}

Container decode_container(const std::string& bytes) {
  if (bytes.size() < sizeof kMagic + 4 + 8 || std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0) {
    throw Error(Errc::BadCheckpoint, "not a checkpoint (bad magic)");
  }
  const std::size_t body = bytes.size() - 8;
  std::uint64_t stored;
  std::memcpy(&stored, bytes.data() + body, 8);
  if (stored != fnv1a(bytes.data(), body)) throw Error(Errc::BadCheckpoint, "checksum mismatch");

  Reader r(bytes, body);
  r.str(sizeof kMagic);
  const auto version = r.get<std::uint32_t>();
  if (version != kCheckpointVersion) {
    throw Error(Errc::BadCheckpoint, "unsupported checkpoint version " + std::to_string(version));
  }
  Container c;
  c.meta = parse_meta(r.str(r.get<std::uint32_t>()));
  const auto count = r.get<std::uint32_t>();
  c.tensors.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    NamedTensor t;
    t.name = r.str(r.get<std::uint32_t>());
    const auto ndim = r.get<std::uint32_t>();
    std::size_t n = 1;
    for (std::uint32_t d = 0; d < ndim; ++d) {
      t.shape.push_back(r.get<std::uint32_t>());
      n *= t.shape.back();
    }
    if (n > body) throw Error(Errc::BadCheckpoint, "tensor '" + t.name + "' larger than the file");
    t.data.resize(n);
    r.floats(t.data.data(), n);
    c.tensors.push_back(std::move(t));
  }
  if (!r.done()) throw Error(Errc::BadCheckpoint, "trailing bytes after the last tensor");
  return c;
}

void write_file_atomic(const std::string& path, const std::string& bytes) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(Errc::Io, "cannot write " + tmp);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error(Errc::Io, "short write to " + tmp);
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) {
    std::remove(tmp.c_str());
    throw Error(Errc::Io, "cannot rename " + tmp + " to " + path);
  }
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::Io, "cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_container(const std::string& path, const Container& c) { write_file_atomic(path, encode_container(c)); }

Container read_container(const std::string& path) {
  try {
    return decode_container(read_file(path));
  } catch (const Error& e) {
    if (e.code() == Errc::BadCheckpoint) throw Error(Errc::BadCheckpoint, path + ": " + e.detail());
    throw;
  }
}

Container model_container(const DualDecoderModel<float>& model, const Meta& extra) {
  Container c;
  c.meta = extra;
  c.meta["kind"] = "dual";
  for (const auto& [k, v] : parse_meta(model.config().to_text())) c.meta["config." + k] = v;
  c.meta["config_digest"] = model.config().digest();
  for (const auto& p : model.parameters()) {
    NamedTensor t;
    t.name = p.name;
    for (auto d : p.tensor.shape()) t.shape.push_back(static_cast<std::uint32_t>(d));
    t.data.assign(p.tensor.data().begin(), p.tensor.data().end());
    c.tensors.push_back(std::move(t));
  }
  return c;
}

std::unique_ptr<DualDecoderModel<float>> model_from_container(const Container& c) {
  auto kind = c.meta.find("kind");
  if (kind == c.meta.end() || kind->second != "dual") throw Error(Errc::BadCheckpoint, "not a dual-decoder checkpoint");
  std::string cfg_text;
  for (const auto& [k, v] : c.meta) {
    if (k.rfind("config.", 0) == 0) cfg_text += k.substr(7) + "=" + v + "\n";
  }
  ModelConfig cfg;
  try {
    cfg = ModelConfig::from_text(cfg_text);
  } catch (const Error& e) {
    throw Error(Errc::BadCheckpoint, "bad model config: " + e.detail());
  }
  auto model = std::make_unique<DualDecoderModel<float>>(cfg, 0);
  for (auto& p : model->parameters()) {
    const NamedTensor* t = c.find(p.name);
    if (!t) throw Error(Errc::BadCheckpoint, "missing tensor '" + p.name + "'");
    std::vector<std::size_t> shape(t->shape.begin(), t->shape.end());
    if (shape != p.tensor.shape()) {
      throw Error(Errc::BadCheckpoint, "tensor '" + p.name + "' has shape " + nn::shape_str(shape) + ", expected " +
                                           nn::shape_str(p.tensor.shape()));
    }
    std::copy(t->data.begin(), t->data.end(), p.tensor.mutable_data().begin());
  }
  return model;
}

void save_model(const std::string& path, const DualDecoderModel<float>& model, const Meta& extra) {
  write_container(path, model_container(model, extra));
}

std::unique_ptr<DualDecoderModel<float>> load_model(const std::string& path) {
  return model_from_container(read_container(path));
}

}  // namespace tunes
