#ifndef ALGEBROID_ALGEBROID_HPP
#define ALGEBROID_ALGEBROID_HPP

#include <Eigen/Core>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "algebroid/common.hpp"
#include "algebroid/expr.hpp"

namespace algebroid {

struct SigmaSpec;  // defined in sigma.hpp; carried through from the model file

/// A Lie algebroid in local data: anchor coefficients Q_a^A(x) and bracket
/// structure functions Q_ab^c(x) over a coordinate chart. Immutable after
/// construction.
struct AlgebroidModel {
  std::string name;
  int dim_m = 0;  // base dimension, 0 for a Lie algebra over a point
  int rank = 1;   // fiber rank n
  std::vector<std::string> coords;  // dim_m names
  std::vector<std::string> frame;   // rank names
  Array2<Expr> anchor;              // anchor(a, A) = Q_a^A
  Array3<Expr> bracket;             // bracket(a, b, c) = Q_ab^c
  Box box;                          // sampling box, dim_m axes

  std::map<std::string, std::vector<Expr>> sections;
  std::vector<Expr> oneform;  // optional C_a(x), empty if absent
  std::shared_ptr<const SigmaSpec> sigma;  // optional lattice block

  /// Phase-space momentum variable paired with frame[i].
  std::string momentum_name(int i) const { return "pi_" + frame[i]; }
  /// Fiber-velocity variable on E paired with frame[i].
  std::string velocity_name(int i) const { return "y_" + frame[i]; }

  std::vector<std::string> momentum_names() const;
  std::vector<std::string> velocity_names() const;

  Binding bind_point(const Eigen::VectorXd& x) const;

  Eigen::MatrixXd anchor_at(const Eigen::VectorXd& x) const;  // rank x dim_m
  double bracket_at(int a, int b, int c, const Binding& bound) const;
};

/// A section u = u^a(x) s_a of the algebroid.
struct Section {
  const AlgebroidModel* owner = nullptr;
  std::vector<Expr> components;  // rank entries
  std::string name;

  Eigen::VectorXd at(const Eigen::VectorXd& x) const;
};

Section make_section(const AlgebroidModel& m, std::vector<Expr> components,
                     std::string name = {});
Section zero_section(const AlgebroidModel& m);

/// Draws `samples` points from the model box, retrying a point up to 8 times
/// on evaluation domain errors before failing loudly.
class BoxSampler {
public:
  BoxSampler(const AlgebroidModel& m, std::uint64_t seed);
  /// Runs `f` on each sample; f throwing EvalError triggers a redraw.
  template <typename F>
  void sweep(int samples, F&& f) {
    for (int s = 0; s < samples; ++s) {
      int retries = 0;
      for (;;) {
        Eigen::VectorXd x = draw();
        try {
          f(x);
          break;
        } catch (const EvalError& err) {
          if (++retries > 8)
            throw EvalError(std::string("sample retry cap exceeded: ") + err.what(), "sampler", -1);
        }
      }
    }
  }
  Eigen::VectorXd draw();

private:
  const AlgebroidModel* model_;
  Rng rng_;
};

// --- Axiom validators (max residual over samples and index choices) -------

double validate_antisymmetry(const AlgebroidModel& m, int samples, std::uint64_t seed);

struct AnchorMorphismResult {
  double full = 0.0;      // rho([s_a,s_b]) - [rho(s_a), rho(s_b)]
  double pairwise = 0.0;  // the paper's displayed identity, without the bracket term
};
AnchorMorphismResult validate_anchor_morphism(const AlgebroidModel& m, int samples,
                                              std::uint64_t seed);

double validate_jacobi(const AlgebroidModel& m, int samples, std::uint64_t seed);

// --- Bracket and anchor ----------------------------------------------------

/// [u,v]^c = Q_a^A (u^a d_A v^c - (d_A u^c) v^a) - Q_ba^c u^a v^b, symbolic.
Section bracket_sections(const Section& u, const Section& v);

/// u^a(p) Q_a^A(p).
Eigen::VectorXd anchor_apply(const Section& u, const Eigen::VectorXd& p);

}  // namespace algebroid

#endif
