#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "tacs/neural.hpp"
#include "tacs/schedule.hpp"

namespace tacs {

enum class FeatureMode {
    Invariant3d, // E(3)-invariant summary, D = 3 only
    RawVector,   // flattened coordinates, for low-D toys
};

enum class PredictionMode { Argmax, Expectation };

// E(3)-invariant summary of a 3-D point set: zero-CoM projection first
// (kills translations), then sorted pairwise distances, sorted atom norms,
// and the mean squared norm. Size M(M-1)/2 + M + 1.
Eigen::VectorXd featurize_invariant(const PointSet& x);

int feature_count(FeatureMode mode, int atom_count, int dim);

// Classifier over noise levels: T logits, logit i scoring timestep i+1
// (bins are 1-based; t = 0 is clean data and never a class).
struct TimePredictor {
    Mlp net;
    int T = 0;
    int atom_count = 0;
    int dim = 0;
    FeatureMode feature_mode = FeatureMode::Invariant3d;
    bool conditional = false;
    int condition_dim = 0;
};

TimePredictor make_time_predictor(int T, int atom_count, int dim,
                                  const std::vector<int>& hidden, Activation act,
                                  FeatureMode mode, bool conditional,
                                  int condition_dim, Rng& rng);

Eigen::VectorXd time_logits(const TimePredictor& tp, const PointSet& x,
                            const Eigen::VectorXd* condition = nullptr);

// Argmax breaks ties toward the smaller timestep. Expectation takes the
// softmax mean of the 1-based bin values and rounds half up, e.g. uniform
// logits with T = 100 give (1+...+100)/100 = 50.5 -> 51.
int predict_from_logits(const Eigen::VectorXd& logits, PredictionMode mode);

int predict_time(const TimePredictor& tp, const PointSet& x, PredictionMode mode,
                 const Eigen::VectorXd* condition = nullptr);

// Clamp a prediction to [t - delta, t + delta], then to [1, T].
int clip_time(int t_pred, int t, int delta, int T);

struct TimePredictorTrainConfig {
    int epochs = 100;
    int batch_size = 64;
    double lr = 1e-3;
    double holdout_fraction = 0.2;
    std::uint64_t seed = 0;
};

struct BandAccuracy {
    int lo = 0, hi = 0; // inclusive timestep band
    double top1 = 0.0;
    double within_delta = 0.0;
    long count = 0;
};

struct TimePredictorTrainResult {
    std::vector<double> loss_curve;          // per-epoch mean cross-entropy
    std::vector<BandAccuracy> holdout_profile; // decile bands, within-delta = 5
    bool aborted = false; // non-finite loss; params restored to last good epoch
};

// Cross-entropy training on x_t = forward_perturb(x0, t, eps) with
// t ~ U{1..T}. Deterministic given cfg.seed. The holdout split is taken
// from a seed-shuffled index order before training.
TimePredictorTrainResult train_time_predictor(TimePredictor& tp,
                                              const std::vector<PointSet>& x0,
                                              const Eigen::MatrixXd* conditions,
                                              const NoiseSchedule& sched,
                                              const TimePredictorTrainConfig& cfg);

// Top-1 and within-+-delta accuracy per timestep band, one fresh forward
// draw per (sample, t) pair, argmax predictions.
std::vector<BandAccuracy> accuracy_profile(const TimePredictor& tp,
                                           const std::vector<PointSet>& x0,
                                           const Eigen::MatrixXd* conditions,
                                           const NoiseSchedule& sched,
                                           const std::vector<std::pair<int, int>>& bands,
                                           int within_delta, Rng& rng);

// Aggregation from (t_true, t_pred) records; the bookkeeping behind
// accuracy_profile, exposed so it can be tested on synthetic records.
std::vector<BandAccuracy> accuracy_from_records(
    const std::vector<std::pair<int, int>>& records,
    const std::vector<std::pair<int, int>>& bands, int within_delta);

std::vector<std::pair<int, int>> decile_bands(int T);

const char* feature_mode_name(FeatureMode mode);
FeatureMode parse_feature_mode(const std::string& name);
const char* prediction_mode_name(PredictionMode mode);
PredictionMode parse_prediction_mode(const std::string& name);

} // namespace tacs
