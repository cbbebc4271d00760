#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tacs/eval.hpp"

namespace tacs {

// FNV-1a over the bytes, 16 lowercase hex digits. Config hashes feed every
// output header so artifacts can be traced back to their exact settings.
std::string fnv1a64_hex(const std::string& data);

// %.17g, enough digits to round-trip a double exactly.
std::string format_double(double v);

std::string read_text_file(const std::string& path);
bool file_exists(const std::string& path);
void ensure_directory(const std::string& path);

// Write-temp-then-rename; partial files never appear under the final name.
void atomic_write_text(const std::string& path, const std::string& content);

// The one-line provenance comment every CSV starts with.
std::string csv_header_comment(const std::string& config_hash);

// sample_id,atom_index,x,y[,z]; defined for 2-D and 3-D point sets.
void write_points_csv(const std::string& path, const std::vector<PointSet>& sets,
                      const std::string& config_hash);
std::vector<PointSet> read_points_csv(const std::string& path);

// sample_id,c
void write_labels_csv(const std::string& path, const Eigen::VectorXd& labels,
                      const std::string& config_hash);
Eigen::VectorXd read_labels_csv(const std::string& path);

// Binary snapshot: "TACS" magic, u32 version 1, u32 M, u32 D, then M*D
// float64 row-major, all little-endian. A batch file is the concatenation.
std::string encode_snapshot(const PointSet& x);
void write_snapshots(const std::string& path, const std::vector<PointSet>& sets);
std::vector<PointSet> read_snapshots(const std::string& path);

// Checkpoints: "TMLP" magic, u32 version 1, u32 activation, u32 layer-size
// count, the sizes, then per layer row-major float64 weights and biases,
// little-endian throughout. Model-level metadata lives in a JSON sidecar at
// path + ".json"; loading requires both files.
void save_score_checkpoint(const std::string& path, const ScoreModel& m, int T,
                           const std::string& config_hash);
ScoreModel load_score_checkpoint(const std::string& path, int* T_out = nullptr);
void save_time_predictor_checkpoint(const std::string& path, const TimePredictor& tp,
                                    const std::string& config_hash);
TimePredictor load_time_predictor_checkpoint(const std::string& path);

// chain_id,step_t,t_pred,guidance_norm,fallback_flag (nulls as empty fields)
void write_trajectory_csv(const std::string& path, const std::vector<ChainResult>& chains,
                          const std::string& config_hash);

// band_lo,band_hi,top1,within_delta
void write_accuracy_csv(const std::string& path, const std::vector<BandAccuracy>& bands,
                        const std::string& config_hash);

// t,mean,std (std empty when undefined)
void write_drift_csv(const std::string& path, const std::vector<DriftRow>& rows,
                     const std::string& config_hash);

// epoch,loss
void write_loss_csv(const std::string& path, const std::vector<double>& curve,
                    const std::string& config_hash);

// axis_value,mae,manifold_l2,invalid_rate,fallback_rate,n,seed; failed cells
// keep their row with empty metrics.
void write_sweep_csv(const std::string& path, const SweepResult& sweep,
                     std::uint64_t seed, const std::string& config_hash);

// sample_id,value,target,abs_err,manifold
void write_per_sample_csv(const std::string& path, const std::vector<PerSampleRow>& rows,
                          const std::string& config_hash);

struct PlotSeries {
    std::string name;
    std::vector<double> x;
    std::vector<double> y; // NaN marks a gap
};

// series,x,y long-form table, one row per point.
void write_plot_data_csv(const std::string& path, const std::vector<PlotSeries>& series,
                         const std::string& config_hash);

// Self-contained SVG line plot of the same series; purely a convenience
// view, the CSV is the artifact of record.
void write_svg_lines(const std::string& path, const std::string& title,
                     const std::string& x_label, const std::string& y_label,
                     const std::vector<PlotSeries>& series);

} // namespace tacs
