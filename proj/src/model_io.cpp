#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include <fmt/format.h>

#include "newsvendor/format.hpp"
#include "newsvendor/models.hpp"

// Document layout:
//
//   newsvendor-model 1
//   mlp <n> <h1> ... <m>
//   demand_scale <value>
//   W <layer> <values, row-major>
//   b <layer> <values>
//   ...
//
// or for a linear model:
//
//   newsvendor-model 1
//   linear <n>
//   intercept <value>
//   weights <values>

namespace newsvendor {

namespace {

constexpr const char* kMagic = "newsvendor-model";
constexpr int kVersion = 1;

void write_values(std::ostream& out, std::span<const double> values) {
  for (double v : values) out << ' ' << format_double(v);
  out << '\n';
}

std::istringstream next_line(std::istream& in, std::string_view expect) {
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) break;
  }
  std::istringstream ls(line);
  std::string tag;
  ls >> tag;
  if (tag != expect) {
    throw std::runtime_error(fmt::format("model file: expected '{}' line, got '{}'", expect, line));
  }
  return ls;
}

std::vector<double> read_values(std::istringstream& ls, std::size_t count, std::string_view what) {
  std::vector<double> values;
  values.reserve(count);
  std::string token;
  while (ls >> token) values.push_back(parse_double(token));
  if (values.size() != count) {
    throw std::runtime_error(
        fmt::format("model file: '{}' has {} values, expected {}", what, values.size(), count));
  }
  return values;
}

}  // namespace

void write_model(std::ostream& out, const AnyModel& model) {
  out << kMagic << ' ' << kVersion << '\n';
  if (const auto* mlp = std::get_if<MlpModel>(&model)) {
    out << "mlp";
    for (auto s : mlp->layer_sizes()) out << ' ' << s;
    out << '\n' << "demand_scale " << format_double(mlp->demand_scale()) << '\n';
    for (std::size_t l = 0; l < mlp->layer_count(); ++l) {
      out << "W " << l;
      write_values(out, mlp->weights(l).values());
      out << "b " << l;
      write_values(out, mlp->biases(l));
    }
  } else {
    const auto& lin = std::get<LinearModel>(model);
    out << "linear " << lin.input_size() << '\n';
    out << "intercept " << format_double(lin.intercept()) << '\n';
    out << "weights";
    write_values(out, lin.weights());
  }
}

AnyModel read_model(std::istream& in) {
  {
    auto header = next_line(in, kMagic);
    int version = 0;
    header >> version;
    if (version != kVersion) {
      throw std::runtime_error(fmt::format("model file: unsupported version {}", version));
    }
  }
  std::string kind;
  {
    auto pos = in.tellg();
    std::string line;
    while (std::getline(in, line) && line.empty()) {
    }
    kind = line.substr(0, line.find(' '));
    in.clear();
    in.seekg(pos);
  }
  if (kind == "mlp") {
    auto ls = next_line(in, "mlp");
    std::vector<std::size_t> sizes;
    std::size_t s;
    while (ls >> s) sizes.push_back(s);
    auto scale_line = next_line(in, "demand_scale");
    std::string token;
    scale_line >> token;
    MlpModel model(sizes, parse_double(token));
    for (std::size_t l = 0; l < model.layer_count(); ++l) {
      auto wl = next_line(in, "W");
      std::size_t idx;
      wl >> idx;
      if (idx != l) throw std::runtime_error(fmt::format("model file: expected layer {}", l));
      auto w = read_values(wl, model.weights(l).size(), "W");
      std::copy(w.begin(), w.end(), model.weights(l).values().begin());
      auto bl = next_line(in, "b");
      bl >> idx;
      if (idx != l) throw std::runtime_error(fmt::format("model file: expected layer {}", l));
      model.biases(l) = read_values(bl, model.biases(l).size(), "b");
    }
    return model;
  }
  if (kind == "linear") {
    auto ls = next_line(in, "linear");
    std::size_t n = 0;
    ls >> n;
    auto il = next_line(in, "intercept");
    std::string token;
    il >> token;
    const double intercept = parse_double(token);
    auto wl = next_line(in, "weights");
    return LinearModel(intercept, read_values(wl, n, "weights"));
  }
  throw std::runtime_error(fmt::format("model file: unknown model type '{}'", kind));
}

void save_model(const std::string& path, const AnyModel& model) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error(fmt::format("cannot write model file '{}'", path));
  write_model(out, model);
}

AnyModel load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error(fmt::format("cannot open model file '{}'", path));
  return read_model(in);
}

}  // namespace newsvendor
