#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "hajscc/autodiff.hpp"
#include "hajscc/models.hpp"

namespace hajscc {

/// Where the largest relative error occurred.
struct FiniteDiffWorst {
  std::size_t param = 0;
  std::size_t index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
};

enum class Stencil {
  kCentral2,  // (f(p+h) - f(p-h)) / 2h
  kCentral4,  // (-f(p+2h) + 8f(p+h) - 8f(p-h) + f(p-2h)) / 12h
};

/// Compares tape gradients of the scalar `f` with central differences for
/// every coordinate of every tensor in `params`. `f` must bind each tensor
/// with Tape::parameter and be deterministic (freeze any RNG inside it).
/// Returns the largest |a - n| / max(|a|, |n|, 1e-8). Parameter values are
/// restored.
double finite_diff_check(const std::function<Var(Tape&)>& f, std::span<Tensor* const> params,
                         double h = 1e-5, FiniteDiffWorst* worst = nullptr,
                         Stencil stencil = Stencil::kCentral2);

enum class SuiteSize { kTiny, kSmall };

struct GradcheckOptions {
  SuiteSize size = SuiteSize::kSmall;
  std::uint64_t seed = 1;
  double tolerance = 1e-5;
  double step = 1e-5;
  /// Step for the five-point stencil used on the end-to-end objectives, whose
  /// smallest gradients (~1e-7) sit below the two-point stencil's roundoff.
  double objective_step = 3e-4;
  /// Cases per entry; 0 picks 100 for kSmall and 8 for kTiny.
  std::size_t cases = 0;
  /// Adds an entry whose backward rule is deliberately wrong by 1%.
  bool inject_fault = false;
};

struct GradcheckEntry {
  std::string name;
  Stencil stencil = Stencil::kCentral2;
  std::size_t cases = 0;
  double max_rel_error = 0.0;
  bool passed = true;
  std::size_t worst_case = 0;
  FiniteDiffWorst worst;
};

struct GradcheckReport {
  std::vector<GradcheckEntry> entries;
  double tolerance = 0.0;
  double seconds = 0.0;

  bool passed() const;
  std::string format() const;
};

/// Randomized finite-difference checks over every op, layer kind, the
/// channel, both losses and the end-to-end objective of toy models.
GradcheckReport run_gradcheck_suite(const GradcheckOptions& options);

/// Toy models small enough to finite-difference every parameter. They use
/// smooth activations so the wide five-point stencil never straddles a relu
/// kink; relu itself is covered by the op-level entries.
ModelConfig toy_reconstruction_config(bool hyper = true);
ModelConfig toy_classification_config(bool hyper = true);

}  // namespace hajscc
