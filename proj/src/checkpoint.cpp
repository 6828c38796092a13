#include "gem/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>

namespace gem {

namespace {

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

void write_config(std::ostream& out, const char* kind, const ModelConfig& cfg) {
  out << "model " << kind << '\n'
      << "d_model " << cfg.d_model << '\n'
      << "n_layers " << cfg.n_layers << '\n'
      << "n_heads " << cfg.n_heads << '\n'
      << "d_ff " << cfg.d_ff << '\n'
      << "vocab_size " << cfg.vocab_size << '\n'
      << "max_positions " << cfg.max_positions << '\n'
      << "init_std " << std::setprecision(17) << cfg.init_std << '\n';
}

void write_params(std::ostream& out, const std::vector<const Parameter*>& params) {
  out << "params " << params.size() << '\n';
  for (const Parameter* p : params) {
    out << p->name << ' ' << p->value.rows() << ' ' << p->value.cols() << ' '
        << (p->trainable ? 1 : 0) << '\n';
    out.write(reinterpret_cast<const char*>(p->value.data()),
              static_cast<std::streamsize>(p->value.size() * sizeof(Scalar)));
    out << '\n';
  }
}

std::string expect_line(std::istream& in, const char* what) {
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error(std::string("checkpoint truncated at ") + what);
  return line;
}

template <typename T>
T read_field(std::istream& in, const char* key) {
  std::istringstream ss(expect_line(in, key));
  std::string name;
  T value{};
  ss >> name >> value;
  if (name != key || ss.fail()) throw std::runtime_error(std::string("checkpoint: expected ") + key);
  return value;
}

void read_params(std::istream& in, const std::vector<Parameter*>& params) {
  const auto n = read_field<std::size_t>(in, "params");
  if (n != params.size()) {
    throw std::runtime_error("checkpoint: expected " + std::to_string(params.size()) +
                             " parameters, found " + std::to_string(n));
  }
  for (Parameter* p : params) {
    std::istringstream ss(expect_line(in, "parameter header"));
    std::string name;
    Eigen::Index rows = 0, cols = 0;
    int trainable = 0;
    ss >> name >> rows >> cols >> trainable;
    if (ss.fail() || name != p->name || rows != p->value.rows() || cols != p->value.cols()) {
      throw std::runtime_error("checkpoint: parameter mismatch at '" + name + "' (expected '" +
                               p->name + "')");
    }
    p->trainable = trainable != 0;
    in.read(reinterpret_cast<char*>(p->value.data()),
            static_cast<std::streamsize>(p->value.size() * sizeof(Scalar)));
    if (in.get() != '\n') throw std::runtime_error("checkpoint: corrupt record '" + name + "'");
    p->zero_grad();
  }
}

}  // namespace

void write_checkpoint(std::ostream& out, const BaseLm& model) {
  out << "GEMCKPT v1\n";
  write_config(out, "base", model.config);
  write_params(out, model.parameters());
}

void write_checkpoint(std::ostream& out, const GemModel& model) {
  out << "GEMCKPT v1\n";
  write_config(out, "gem", model.config());
  write_params(out, model.parameters());
}

AnyModel read_checkpoint(std::istream& in) {
  if (expect_line(in, "header") != "GEMCKPT v1") throw std::runtime_error("not a GEMCKPT v1 file");
  const auto kind = read_field<std::string>(in, "model");
  ModelConfig cfg;
  cfg.d_model = read_field<int>(in, "d_model");
  cfg.n_layers = read_field<int>(in, "n_layers");
  cfg.n_heads = read_field<int>(in, "n_heads");
  cfg.d_ff = read_field<int>(in, "d_ff");
  cfg.vocab_size = read_field<int>(in, "vocab_size");
  cfg.max_positions = read_field<int>(in, "max_positions");
  cfg.init_std = read_field<double>(in, "init_std");
  cfg.validate();

  // Build the parameter layout, then overwrite the values.
  BaseLm base = BaseLm::init(cfg, 0);
  if (kind == "base") {
    read_params(in, base.parameters());
    return base;
  }
  if (kind == "gem") {
    GemModel gem = extend_from_base(base, 0);
    read_params(in, gem.parameters());
    return gem;
  }
  throw std::runtime_error("checkpoint: unknown model kind '" + kind + "'");
}

void save_checkpoint(const std::filesystem::path& path, const BaseLm& model) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  write_checkpoint(out, model);
}

void save_checkpoint(const std::filesystem::path& path, const GemModel& model) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  write_checkpoint(out, model);
}

AnyModel load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint " + path.string());
  return read_checkpoint(in);
}

BaseLm load_base(const std::filesystem::path& path) {
  auto m = load_checkpoint(path);
  if (auto* b = std::get_if<BaseLm>(&m)) return std::move(*b);
  throw std::runtime_error(path.string() + " holds a GEM model, expected a base LM");
}

GemModel load_gem(const std::filesystem::path& path) {
  auto m = load_checkpoint(path);
  if (auto* g = std::get_if<GemModel>(&m)) return std::move(*g);
  throw std::runtime_error(path.string() + " holds a base LM, expected a GEM model");
}

}  // namespace gem
