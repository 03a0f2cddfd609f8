#pragma once

// Gradient-flow diagnostics: norm-vs-depth profiles of an untrained network
// and per-iteration traces of delta norms and activation statistics. Output is
// CSV only; see docs/FORMATS.md for the column layouts.

#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "srnreg/io.hpp"
#include "srnreg/model.hpp"
#include "srnreg/regularizer.hpp"
#include "srnreg/tasks.hpp"
#include "srnreg/trainer.hpp"

namespace srnreg {

/// Per-depth means over a probe set; entry n is depth n = 0..h.
struct DepthProfile {
  std::vector<double> delta_norm;  // ||delta(T-n)||
  std::vector<double> gwin_norm;   // ||dE/dw_in contribution of step T-n||
  std::vector<double> gwrec_norm;  // ||dE/dw_rec contribution of step T-n||

  std::size_t size() const { return delta_norm.size(); }
};

DepthProfile depth_scan(const SrnParams& params, const SequenceBatch& probes, std::size_t h);

/// Returned by correlation_check when a curve has no usable variance.
constexpr double kNoCorrelation = -2.0;

/// Smaller of the Pearson correlations between log10 delta norms and the log10
/// w_in / w_rec gradient norms, over depths where all three are positive.
/// Returns kNoCorrelation if fewer than two such depths exist or a curve is
/// constant.
double correlation_check(const DepthProfile& profile);

double pearson(const std::vector<double>& x, const std::vector<double>& y);

void write_depth_profile(const DepthProfile& profile, const std::filesystem::path& path);
DepthProfile read_depth_profile(const std::filesystem::path& path);

/// One row of dynamics.csv.
struct DynamicsRow {
  std::size_t iter = 0;
  double delta_d0 = 0.0;
  double delta_dmid = 0.0;
  double delta_dh = 0.0;
  double act_mean = 0.0;
  double act_median = 0.0;
  Decision decision = Decision::Accept;
  bool operator==(const DynamicsRow&) const = default;
};

using DynamicsTrace = std::vector<DynamicsRow>;

/// Records every draw (accepted or rejected); optionally streams to CSV.
class DynamicsRecorder : public TrainObserver {
 public:
  DynamicsRecorder() = default;
  explicit DynamicsRecorder(const std::filesystem::path& csv);

  void on_iteration(const IterationRecord& rec) override;
  const DynamicsTrace& trace() const { return trace_; }

 private:
  DynamicsTrace trace_;
  std::unique_ptr<CsvWriter> csv_;
};

DynamicsTrace read_dynamics(const std::filesystem::path& path);

/// Per-iteration metrics.csv and per-epoch epochs.csv.
class MetricsRecorder : public TrainObserver {
 public:
  MetricsRecorder(const std::filesystem::path& metrics_csv, const std::filesystem::path& epochs_csv);

  void on_iteration(const IterationRecord& rec) override;
  void on_epoch(const EpochRecord& rec) override;

 private:
  CsvWriter metrics_;
  CsvWriter epochs_;
};

/// Fans one trainer event stream out to several observers.
class ObserverList : public TrainObserver {
 public:
  void add(TrainObserver* o) { observers_.push_back(o); }
  void on_iteration(const IterationRecord& r) override;
  void on_epoch(const EpochRecord& r) override;
  void on_warning(const std::string& w) override;

 private:
  std::vector<TrainObserver*> observers_;
};

struct GateAudit {
  std::size_t rows = 0;
  std::size_t accepts = 0;
  std::size_t violations = 0;  // logged decision differs from the gate recomputed on logged values
};

/// Replays the gate over a metrics.csv produced with `cfg`.
GateAudit audit_gate_log(const std::filesystem::path& metrics_csv, const RegConfig& cfg);

}  // namespace srnreg
