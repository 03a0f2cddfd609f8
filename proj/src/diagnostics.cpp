#include "srnreg/diagnostics.hpp"

#include <cmath>
#include <stdexcept>

#include "srnreg/bptt.hpp"

namespace srnreg {

DepthProfile depth_scan(const SrnParams& params, const SequenceBatch& probes, std::size_t h) {
  if (probes.size() == 0) throw std::invalid_argument("depth_scan: empty probe set");
  if (h < 1 || h > probes.spec.T) {
    throw std::invalid_argument("depth_scan: h=" + std::to_string(h) + " outside [1, T=" +
                                std::to_string(probes.spec.T) + "]");
  }
  DepthProfile p;
  p.delta_norm.assign(h + 1, 0.0);
  p.gwin_norm.assign(h + 1, 0.0);
  p.gwrec_norm.assign(h + 1, 0.0);
  const double inv_n = 1.0 / static_cast<double>(probes.size());
  for (std::size_t i = 0; i < probes.size(); ++i) {
    ForwardTrace tr = forward(params, probes.inputs[i]);
    LossResult lr = output_loss(tr, probes.targets[i], probes.spec.loss, probes.spec.success_tolerance);
    BpttResult br = backward(params, tr, lr.output_delta, BpttConfig{h});
    for (std::size_t n = 0; n <= h; ++n) {
      p.delta_norm[n] += inv_n * br.delta_norms[n];
      p.gwin_norm[n] += inv_n * br.gw_in_norms[n];
      p.gwrec_norm[n] += inv_n * br.gw_rec_norms[n];
    }
  }
  return p;
}

double pearson(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size()) throw DimensionError("pearson: length mismatch");
  const std::size_t n = x.size();
  if (n < 2) return kNoCorrelation;
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (!(sxx > 0.0) || !(syy > 0.0)) return kNoCorrelation;
  return sxy / std::sqrt(sxx * syy);
}

double correlation_check(const DepthProfile& profile) {
  std::vector<double> ld, lin, lrec;
  for (std::size_t n = 0; n < profile.size(); ++n) {
    if (profile.delta_norm[n] > 0.0 && profile.gwin_norm[n] > 0.0 && profile.gwrec_norm[n] > 0.0) {
      ld.push_back(std::log10(profile.delta_norm[n]));
      lin.push_back(std::log10(profile.gwin_norm[n]));
      lrec.push_back(std::log10(profile.gwrec_norm[n]));
    }
  }
  const double a = pearson(ld, lin);
  const double b = pearson(ld, lrec);
  if (a == kNoCorrelation || b == kNoCorrelation) return kNoCorrelation;
  return std::min(a, b);
}

void write_depth_profile(const DepthProfile& profile, const std::filesystem::path& path) {
  CsvWriter csv(path, {"depth", "delta_norm", "gwin_norm", "gwrec_norm"});
  for (std::size_t n = 0; n < profile.size(); ++n) {
    csv.cell(n).cell(profile.delta_norm[n]).cell(profile.gwin_norm[n]).cell(profile.gwrec_norm[n]);
    csv.end_row();
  }
}

DepthProfile read_depth_profile(const std::filesystem::path& path) {
  CsvTable t = read_csv(path);
  const auto cd = t.column("delta_norm"), ci = t.column("gwin_norm"), cr = t.column("gwrec_norm");
  DepthProfile p;
  for (const auto& row : t.rows) {
    p.delta_norm.push_back(parse_double(row[cd]));
    p.gwin_norm.push_back(parse_double(row[ci]));
    p.gwrec_norm.push_back(parse_double(row[cr]));
  }
  return p;
}

namespace {

const std::vector<std::string> kDynamicsHeader = {"iter",     "delta_norm_d0", "delta_norm_dmid",
                                                  "delta_norm_dh", "act_mean", "act_median",
                                                  "decision"};

}  // namespace

DynamicsRecorder::DynamicsRecorder(const std::filesystem::path& csv)
    : csv_(std::make_unique<CsvWriter>(csv, kDynamicsHeader)) {}

void DynamicsRecorder::on_iteration(const IterationRecord& rec) {
  DynamicsRow row{rec.iter,     rec.delta_d0,   rec.delta_dmid,     rec.delta_dh,
                  rec.act_mean, rec.act_median, rec.report.decision};
  if (csv_) {
    csv_->cell(row.iter).cell(row.delta_d0).cell(row.delta_dmid).cell(row.delta_dh);
    csv_->cell(row.act_mean).cell(row.act_median).cell(to_string(row.decision));
    csv_->end_row();
  }
  trace_.push_back(row);
}

DynamicsTrace read_dynamics(const std::filesystem::path& path) {
  CsvTable t = read_csv(path);
  std::vector<std::size_t> col;
  for (const auto& h : kDynamicsHeader) col.push_back(t.column(h));
  DynamicsTrace out;
  for (const auto& r : t.rows) {
    DynamicsRow row;
    row.iter = static_cast<std::size_t>(parse_int(r[col[0]]));
    row.delta_d0 = parse_double(r[col[1]]);
    row.delta_dmid = parse_double(r[col[2]]);
    row.delta_dh = parse_double(r[col[3]]);
    row.act_mean = parse_double(r[col[4]]);
    row.act_median = parse_double(r[col[5]]);
    row.decision = parse_decision(r[col[6]]);
    out.push_back(row);
  }
  return out;
}

MetricsRecorder::MetricsRecorder(const std::filesystem::path& metrics_csv,
                                 const std::filesystem::path& epochs_csv)
    : metrics_(metrics_csv, {"iter", "epoch", "loss", "dS", "S", "q", "r0", "decision", "applied",
                             "forced", "delta_top", "delta_deep", "gnorm_in", "gnorm_rec",
                             "gnorm_out", "gnorm_b"}),
      epochs_(epochs_csv, {"epoch", "corrections", "draws", "valid_accuracy", "best_valid_accuracy",
                           "starved"}) {}

void MetricsRecorder::on_iteration(const IterationRecord& r) {
  metrics_.cell(r.iter).cell(r.epoch).cell(r.loss);
  metrics_.cell(r.report.dS).cell(r.report.S).cell(r.report.q).cell(r.report.r0);
  metrics_.cell(to_string(r.report.decision)).cell(r.applied ? 1 : 0).cell(r.forced ? 1 : 0);
  metrics_.cell(r.report.norm_top).cell(r.report.norm_deep);
  metrics_.cell(r.gnorm_in).cell(r.gnorm_rec).cell(r.gnorm_out).cell(r.gnorm_b);
  metrics_.end_row();
}

void MetricsRecorder::on_epoch(const EpochRecord& r) {
  epochs_.cell(r.epoch).cell(r.corrections).cell(r.draws);
  epochs_.cell(r.valid_accuracy).cell(r.best_valid_accuracy).cell(r.starved ? 1 : 0);
  epochs_.end_row();
  metrics_.flush();
  epochs_.flush();
}

void ObserverList::on_iteration(const IterationRecord& r) {
  for (auto* o : observers_) o->on_iteration(r);
}

void ObserverList::on_epoch(const EpochRecord& r) {
  for (auto* o : observers_) o->on_epoch(r);
}

void ObserverList::on_warning(const std::string& w) {
  for (auto* o : observers_) o->on_warning(w);
}

GateAudit audit_gate_log(const std::filesystem::path& metrics_csv, const RegConfig& cfg) {
  CsvTable t = read_csv(metrics_csv);
  const auto c_ds = t.column("dS"), c_s = t.column("S"), c_q = t.column("q"),
             c_dec = t.column("decision");
  GateAudit audit;
  for (const auto& row : t.rows) {
    ++audit.rows;
    const Decision logged = parse_decision(row[c_dec]);
    const Decision replay = gate(parse_double(row[c_ds]), cfg.gate_q(parse_double(row[c_q])), cfg,
                                 parse_double(row[c_s]));
    if (logged == Decision::Accept) ++audit.accepts;
    if (logged != replay) ++audit.violations;
  }
  return audit;
}

}  // namespace srnreg
