#include "hajscc/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "hajscc/errors.hpp"

namespace hajscc {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes little-endian");

namespace {

template <typename T>
void put(std::string& out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

class Reader {
 public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}

  template <typename T>
  T get(const char* what) {
    need(sizeof(T), what);
    T v;
    std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }

  std::string_view take(std::size_t n, const char* what) {
    need(n, what);
    auto s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  std::size_t pos() const { return pos_; }

 private:
  void need(std::size_t n, const char* what) const {
    if (bytes_.size() - pos_ < n) {
      throw FormatError(fmt::format("checkpoint truncated while reading {}", what));
    }
  }

  std::string_view bytes_;
  std::size_t pos_ = 0;
};

std::uint64_t digest_u64(const ModelConfig& m) {
  const std::string text = model_canonical(m);
  return fnv1a64(text.data(), text.size());
}

}  // namespace

std::string serialize_checkpoint(HyperAJSCCModel& model, const RunConfig& config) {
  if (model_canonical(model.config()) != model_canonical(config.model)) {
    throw ContractError("checkpoint: config does not describe this model");
  }
  std::string out(kCheckpointMagic, 4);
  put<std::uint32_t>(out, kCheckpointVersion);
  put<std::uint64_t>(out, digest_u64(config.model));
  const OmegaMap map = config.model.omega_map();
  put<double>(out, map.gain);
  put<double>(out, map.offset);
  const std::string text = config.canonical();
  put<std::uint32_t>(out, std::uint32_t(text.size()));
  out += text;

  const NamedParams params = model.parameters();
  put<std::uint32_t>(out, std::uint32_t(params.size()));
  for (const auto& [name, t] : params) {
    put<std::uint32_t>(out, std::uint32_t(name.size()));
    out += name;
    put<std::uint32_t>(out, std::uint32_t(t->rank()));
    for (std::size_t d : t->shape()) put<std::uint32_t>(out, std::uint32_t(d));
    for (double v : t->data()) put<float>(out, float(v));
  }
  put<std::uint64_t>(out, fnv1a64(out.data(), out.size()));
  return out;
}

void save_checkpoint(const std::filesystem::path& file, HyperAJSCCModel& model,
                     const RunConfig& config) {
  const std::string bytes = serialize_checkpoint(model, config);
  std::ofstream out(file, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(fmt::format("cannot write checkpoint {}", file.string()));
  out.write(bytes.data(), std::streamsize(bytes.size()));
  if (!out) throw Error(fmt::format("failed writing checkpoint {}", file.string()));
}

LoadedCheckpoint parse_checkpoint(const std::string& bytes, const RunConfig* expected, bool force) {
  if (bytes.size() < 4 + 4 + 8 + 8 + 8 + 4 + 4 + 8) throw FormatError("checkpoint too short");
  const std::size_t body = bytes.size() - 8;
  std::uint64_t stored_sum;
  std::memcpy(&stored_sum, bytes.data() + body, 8);
  if (fnv1a64(bytes.data(), body) != stored_sum) throw FormatError("checkpoint checksum mismatch");

  Reader r(std::string_view(bytes).substr(0, body));
  if (r.take(4, "magic") != std::string_view(kCheckpointMagic, 4)) {
    throw FormatError("not a checkpoint (bad magic)");
  }
  const auto version = r.get<std::uint32_t>("version");
  if (version != kCheckpointVersion) {
    throw FormatError(fmt::format("unsupported checkpoint version {}", version));
  }
  const auto digest = r.get<std::uint64_t>("digest");
  const double gain = r.get<double>("omega gain");
  const double offset = r.get<double>("omega offset");
  const auto text_len = r.get<std::uint32_t>("config length");
  const std::string text(r.take(text_len, "config text"));

  RunConfig config;
  try {
    config = RunConfig::parse(text, "<checkpoint>");
  } catch (const ConfigError& e) {
    throw FormatError(fmt::format("checkpoint carries an invalid config: {}", e.what()));
  }
  if (digest_u64(config.model) != digest) throw FormatError("checkpoint digest does not match its config");
  const OmegaMap map = config.model.omega_map();
  if (map.gain != gain || map.offset != offset) throw FormatError("checkpoint omega map mismatch");

  if (expected && digest_u64(expected->model) != digest && !force) {
    throw ConfigError(fmt::format(
        "checkpoint model digest {:016x} differs from the config's {}; pass --force to override",
        digest, model_digest(expected->model)));
  }

  HyperAJSCCModel model = build_model(config.model, 0);
  NamedParams params = model.parameters();
  const auto count = r.get<std::uint32_t>("tensor count");
  if (count != params.size()) {
    throw FormatError(fmt::format("checkpoint has {} tensors, model expects {}", count, params.size()));
  }
  for (auto& [name, t] : params) {
    const auto name_len = r.get<std::uint32_t>("name length");
    const std::string_view got = r.take(name_len, "tensor name");
    if (got != name) throw FormatError(fmt::format("expected tensor '{}', found '{}'", name, got));
    const auto rank = r.get<std::uint32_t>("rank");
    Shape shape(rank);
    for (auto& d : shape) d = r.get<std::uint32_t>("dims");
    if (shape != t->shape()) {
      throw FormatError(fmt::format("tensor '{}' has shape {}, model expects {}", name,
                                    shape_str(shape), shape_str(t->shape())));
    }
    for (double& v : t->data()) v = double(r.get<float>("tensor values"));
  }
  if (r.pos() != body) throw FormatError("trailing bytes in checkpoint");
  return {std::move(config), std::move(model)};
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& file, const RunConfig* expected,
                                 bool force) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw FormatError(fmt::format("cannot read checkpoint {}", file.string()));
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_checkpoint(buf.str(), expected, force);
}

}  // namespace hajscc
