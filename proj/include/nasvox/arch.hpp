#ifndef NASVOX_ARCH_HPP
#define NASVOX_ARCH_HPP

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace nasvox {

enum class ActivationKind : std::uint8_t { ReLU = 0, ELU = 1, Swish = 2 };

struct Activation {
  ActivationKind kind = ActivationKind::ReLU;
  double alpha = 1.0;  // ELU
  double beta = 1.0;   // Swish

  friend bool operator==(const Activation&, const Activation&) = default;
};

// ReLU: max(x, 0); ELU: x for x >= 0, alpha*(e^x - 1) otherwise; Swish: x*sigmoid(beta*x).
double activate(const Activation& a, double x);
double activate_derivative(const Activation& a, double x);

std::string_view to_string(ActivationKind kind);
/// Accepts "relu", "elu", "swish" (any case).
ActivationKind parse_activation(std::string_view name);

struct LayerSpec {
  int width = 0;
  Activation activation;

  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

/// Hidden layers of a 3 -> ... -> 1 MLP.
struct ArchSpec {
  std::vector<LayerSpec> hidden;

  std::size_t depth() const { return hidden.size(); }
  friend bool operator==(const ArchSpec&, const ArchSpec&) = default;
};

inline constexpr int kInputDim = 3;
inline constexpr int kMaxHidden = 6;
inline constexpr std::array<int, 11> kSearchWidths = {8, 12, 16, 20, 24, 28, 32, 40, 48, 56, 64};

/// Scalars in an MLP of this shape: weights and biases of every hidden layer plus the output head.
std::int64_t parameter_count(const ArchSpec& arch);

/// Structural check used by the network itself: at least one hidden layer, positive widths.
void validate_structure(const ArchSpec& arch);
/// Search-space check: 1..6 hidden layers, widths drawn from kSearchWidths.
bool within_search_caps(const ArchSpec& arch);

/// "32:relu,16:swish" form.
std::string to_string(const ArchSpec& arch);
ArchSpec parse_arch(std::string_view text);

/// The fixed no-search baseline: `layers` hidden layers of `width` ReLU units.
ArchSpec uniform_arch(int layers, int width, ActivationKind kind = ActivationKind::ReLU);

}  // namespace nasvox

#endif  // NASVOX_ARCH_HPP
