#ifndef UAPLAB_ATTACKS_HPP
#define UAPLAB_ATTACKS_HPP

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "uaplab/grad_model.hpp"
#include "uaplab/numeric.hpp"
#include "uaplab/signal.hpp"

namespace uaplab::attacks {

enum class Domain { Waveform, Spectrogram, Mfcc };
enum class Provenance { DeepFool, UapHc, TargetConf, Random, SingularVector };
enum class NormOrder { L2, LInf };

std::string domain_name(Domain d);
std::string provenance_name(Provenance p);

/// A perturbation vector in one of the three representation domains, with
/// its Euclidean norm kept in sync with the values.
struct Perturbation {
  std::vector<double> values;
  Domain domain = Domain::Waveform;
  Provenance provenance = Provenance::Random;
  double norm_l2 = 0.0;

  static Perturbation make(std::vector<double> values, Domain domain, Provenance prov);
  void refresh_norm();
  double linf_norm() const;
};

/// Euclidean-nearest point of the lp ball of radius `radius` centered at 0.
/// For L2 the scale carries a 1e-12 relative shrink so projecting twice is
/// bit-identical.
std::vector<double> project_lp(const std::vector<double>& v, NormOrder p, double radius);
Perturbation project_lp(const Perturbation& v, NormOrder p, double radius);

struct DeepFoolOptions {
  int max_iter = 50;
  double overshoot = 1.02;
  /// When set, the input must currently classify to this class.
  std::optional<int> expected_class;
};

struct DeepFoolResult {
  Perturbation r;      // post-overshoot
  bool converged = false;
  int steps = 0;
  int final_class = -1;          // class of x + r
  double pre_overshoot_norm = 0.0;
};

/// Iterative first-order step toward the estimated nearest allowed decision
/// boundary. `restricted` classes are never used as step targets. Throws
/// AlreadyFooled when expected_class is set and already violated; an
/// unconverged run returns its best-effort perturbation flagged accordingly.
DeepFoolResult deepfool(const std::vector<double>& x, const GradientModel& model,
                        const std::set<int>& restricted, const DeepFoolOptions& opt = {});

struct UapConfig {
  double xi = 0.1;
  NormOrder p = NormOrder::L2;
  double delta = 0.2;  // stop once the training fooling rate reaches 1 - delta
  int max_passes = 5;
  std::set<int> restricted;
  uint64_t seed = 1;
};

struct TraceRow {
  int pass = 0;            // 1-based pass over the input set
  double fooling_rate = 0.0;
  double dominant_share = 0.0;   // fraction of inputs sent to the trace class
  double self_confidence = 0.0;  // model confidence that v itself is that class
  double norm_l2 = 0.0;
  int dominant_class = -1;       // class the model assigns to v
};

struct AttackTrace {
  std::vector<TraceRow> rows;
  std::string stop_reason;  // "fr_threshold" | "max_passes"
  double final_fooling_rate = 0.0;
  int deepfool_unconverged = 0;
  double peak_abs_perturbed = 0.0;  // max |x_i + v| seen at accepted updates
};

struct UapResult {
  Perturbation v;
  AttackTrace trace;
};

/// Hill-climbing accumulation of per-input steps into one universal
/// perturbation: candidates are projected into the lp ball and accepted only
/// if they strictly raise the fooling rate over `inputs` and the triggering
/// input's new class is not restricted.
UapResult uap_hc(const std::vector<std::vector<double>>& inputs, const GradientModel& model,
                 const UapConfig& cfg, int threads = 1);

/// Projected gradient ascent on the model's confidence that v itself belongs
/// to `target`, inside the L2 ball of radius xi. Returns the best iterate.
Perturbation target_confidence_attack(const GradientModel& model, int target, double xi, int iters,
                                      double step, uint64_t seed);

/// Coordinates uniform in [-1,1], rescaled to an exact L2 norm.
Perturbation random_waveform_perturbation(uint64_t seed, double target_l2, int dim);

/// Feature-space footprint of a waveform perturbation at anchor x:
/// g(x + v) - g(x). Depends on the anchor because g is nonlinear.
Perturbation feature_perturbation(const signal::Pipeline& pipe, const signal::Waveform& x,
                                  const std::vector<double>& v, signal::Repr repr);

/// Artifact IO: metadata JSON at `path_base`.json plus raw little-endian
/// float32 payload at `path_base`.f32.
void save_perturbation(const std::string& path_base, const Perturbation& p,
                       const std::string& extra_json = "{}");
Perturbation load_perturbation(const std::string& path_base);

}  // namespace uaplab::attacks

#endif  // UAPLAB_ATTACKS_HPP
