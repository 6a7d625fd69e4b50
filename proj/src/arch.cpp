#include "nasvox/arch.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <stdexcept>

namespace nasvox {

double activate(const Activation& a, double x) {
  switch (a.kind) {
    case ActivationKind::ReLU:
      return x >= 0.0 ? x : 0.0;
    case ActivationKind::ELU:
      return x >= 0.0 ? x : a.alpha * std::expm1(x);
    case ActivationKind::Swish:
      return x / (1.0 + std::exp(-a.beta * x));
  }
  return 0.0;
}

double activate_derivative(const Activation& a, double x) {
  switch (a.kind) {
    case ActivationKind::ReLU:
      return x > 0.0 ? 1.0 : 0.0;
    case ActivationKind::ELU:
      return x >= 0.0 ? 1.0 : a.alpha * std::exp(x);
    case ActivationKind::Swish: {
      const double s = 1.0 / (1.0 + std::exp(-a.beta * x));
      return s + a.beta * x * s * (1.0 - s);
    }
  }
  return 0.0;
}

std::string_view to_string(ActivationKind kind) {
  switch (kind) {
    case ActivationKind::ReLU:
      return "relu";
    case ActivationKind::ELU:
      return "elu";
    case ActivationKind::Swish:
      return "swish";
  }
  return "?";
}

ActivationKind parse_activation(std::string_view name) {
  std::string s(name);
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (s == "relu") return ActivationKind::ReLU;
  if (s == "elu") return ActivationKind::ELU;
  if (s == "swish") return ActivationKind::Swish;
  throw std::invalid_argument("unknown activation '" + std::string(name) + "'");
}

std::int64_t parameter_count(const ArchSpec& arch) {
  std::int64_t total = 0;
  std::int64_t fan_in = kInputDim;
  for (const auto& layer : arch.hidden) {
    total += fan_in * layer.width + layer.width;
    fan_in = layer.width;
  }
  return total + fan_in + 1;
}

void validate_structure(const ArchSpec& arch) {
  if (arch.hidden.empty()) throw std::invalid_argument("architecture needs at least one hidden layer");
  if (arch.hidden.size() > 255) throw std::invalid_argument("too many hidden layers");
  for (const auto& l : arch.hidden) {
    if (l.width <= 0 || l.width > 65535) throw std::invalid_argument("hidden width out of range");
    if (!(l.activation.alpha > 0.0) || !(l.activation.beta > 0.0))
      throw std::invalid_argument("activation parameters must be positive");
  }
}

bool within_search_caps(const ArchSpec& arch) {
  if (arch.hidden.empty() || arch.hidden.size() > static_cast<std::size_t>(kMaxHidden)) return false;
  return std::all_of(arch.hidden.begin(), arch.hidden.end(), [](const LayerSpec& l) {
    return std::find(kSearchWidths.begin(), kSearchWidths.end(), l.width) != kSearchWidths.end();
  });
}

std::string to_string(const ArchSpec& arch) {
  std::string out;
  for (const auto& l : arch.hidden) {
    if (!out.empty()) out += ',';
    out += std::to_string(l.width);
    out += ':';
    out += to_string(l.activation.kind);
  }
  return out;
}

ArchSpec parse_arch(std::string_view text) {
  ArchSpec arch;
  while (!text.empty()) {
    const auto comma = text.find(',');
    std::string_view item = text.substr(0, comma);
    text = comma == std::string_view::npos ? std::string_view{} : text.substr(comma + 1);
    const auto colon = item.find(':');
    const std::string_view width_text = item.substr(0, colon);
    int width = 0;
    const auto [ptr, ec] = std::from_chars(width_text.data(), width_text.data() + width_text.size(), width);
    if (ec != std::errc() || ptr != width_text.data() + width_text.size())
      throw std::invalid_argument("bad layer width in '" + std::string(item) + "'");
    LayerSpec layer{width, {}};
    if (colon != std::string_view::npos) layer.activation.kind = parse_activation(item.substr(colon + 1));
    arch.hidden.push_back(layer);
  }
  validate_structure(arch);
  return arch;
}

ArchSpec uniform_arch(int layers, int width, ActivationKind kind) {
  ArchSpec arch;
  arch.hidden.assign(static_cast<std::size_t>(layers), LayerSpec{width, Activation{kind}});
  return arch;
}

}  // namespace nasvox
