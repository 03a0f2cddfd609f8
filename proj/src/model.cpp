#include "srnreg/model.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "srnreg/io.hpp"
#include "srnreg/rng.hpp"

namespace srnreg {

std::string to_string(OutputActivation a) {
  return a == OutputActivation::Linear ? "linear" : "softmax";
}

std::string to_string(SigmaKind k) { return k == SigmaKind::StdDev ? "stddev" : "variance"; }

OutputActivation parse_output_activation(std::string_view s) {
  if (s == "linear") return OutputActivation::Linear;
  if (s == "softmax") return OutputActivation::Softmax;
  throw ParseError("unknown output activation '" + std::string(s) + "'");
}

SigmaKind parse_sigma_kind(std::string_view s) {
  if (s == "stddev") return SigmaKind::StdDev;
  if (s == "variance") return SigmaKind::Variance;
  throw ParseError("unknown sigma kind '" + std::string(s) + "' (expected stddev|variance)");
}

void SrnParams::validate() const {
  const std::size_t h = w_rec.rows();
  if (h == 0) throw DimensionError("SrnParams: n_hid must be >= 1");
  if (w_rec.cols() != h) throw DimensionError("SrnParams: w_rec not square " + shape_str(w_rec));
  if (w_in.cols() != h || w_in.rows() == 0)
    throw DimensionError("SrnParams: w_in " + shape_str(w_in) + " vs n_hid " + std::to_string(h));
  if (w_out.rows() != h || w_out.cols() == 0)
    throw DimensionError("SrnParams: w_out " + shape_str(w_out) + " vs n_hid " + std::to_string(h));
  if (b.size() != h)
    throw DimensionError("SrnParams: b length " + std::to_string(b.size()) + " vs n_hid " +
                         std::to_string(h));
}

SrnParams make_zero_params(std::size_t n_in, std::size_t n_hid, std::size_t n_out,
                           OutputActivation output) {
  if (n_in == 0 || n_hid == 0 || n_out == 0) {
    throw DimensionError("network dimensions must be positive (n_in=" + std::to_string(n_in) +
                         ", n_hid=" + std::to_string(n_hid) + ", n_out=" + std::to_string(n_out) +
                         ")");
  }
  SrnParams p;
  p.w_in = Mat(n_in, n_hid);
  p.w_rec = Mat(n_hid, n_hid);
  p.w_out = Mat(n_hid, n_out);
  p.b = Vec(n_hid);
  p.output = output;
  return p;
}

SrnParams init_gaussian(std::size_t n_in, std::size_t n_hid, std::size_t n_out, double sigma,
                        std::uint64_t seed, OutputActivation output, SigmaKind kind) {
  if (!(sigma > 0.0)) throw std::invalid_argument("init_gaussian: sigma must be > 0");
  SrnParams p = make_zero_params(n_in, n_hid, n_out, output);
  p.seed = seed;
  const double stddev = kind == SigmaKind::StdDev ? sigma : std::sqrt(sigma);
  Rng rng(seed);
  for (Mat* m : {&p.w_in, &p.w_rec, &p.w_out})
    for (double& w : m->span()) w = rng.normal(0.0, stddev);
  return p;
}

ForwardTrace forward(const SrnParams& params, const Sequence& seq) {
  return forward(params, seq, Vec(params.n_hid()));
}

ForwardTrace forward(const SrnParams& params, const Sequence& seq, const Vec& z0) {
  params.validate();
  const std::size_t n_hid = params.n_hid();
  if (z0.size() != n_hid) {
    throw DimensionError("forward: z0 length " + std::to_string(z0.size()) + " vs n_hid " +
                         std::to_string(n_hid));
  }
  if (seq.empty()) throw DimensionError("forward: empty sequence");

  const std::size_t T = seq.size();
  ForwardTrace tr;
  tr.u.reserve(T + 1);
  tr.a.reserve(T + 1);
  tr.z.reserve(T + 1);
  tr.fprime.reserve(T + 1);

  tr.u.emplace_back(params.n_in());
  tr.a.push_back(map(z0, [](double z) { return std::atanh(z); }));
  tr.z.push_back(z0);
  tr.fprime.push_back(map(z0, [](double z) { return 1.0 - z * z; }));

  for (std::size_t k = 1; k <= T; ++k) {
    const Vec& u = seq[k - 1];
    if (u.size() != params.n_in()) {
      throw DimensionError("forward: input at step " + std::to_string(k) + " has length " +
                           std::to_string(u.size()) + ", expected " +
                           std::to_string(params.n_in()));
    }
    Vec a = row_vec_mat(u, params.w_in);
    axpy(1.0, row_vec_mat(tr.z[k - 1], params.w_rec), a);
    axpy(1.0, params.b, a);
    if (!all_finite(a.span())) {
      throw NumericalError("forward: non-finite activation at step " + std::to_string(k));
    }
    Vec z = map(a, [](double x) { return std::tanh(x); });
    Vec fp = map(z, [](double v) { return 1.0 - v * v; });
    tr.u.push_back(u);
    tr.a.push_back(std::move(a));
    tr.z.push_back(std::move(z));
    tr.fprime.push_back(std::move(fp));
  }

  tr.out_pre = row_vec_mat(tr.z[T], params.w_out);
  if (!all_finite(tr.out_pre.span())) throw NumericalError("forward: non-finite output");
  tr.output = params.output;
  tr.y = params.output == OutputActivation::Softmax ? softmax(tr.out_pre) : tr.out_pre;
  return tr;
}

Vec softmax(const Vec& x) {
  const double mx = *std::max_element(x.begin(), x.end());
  Vec e = map(x, [mx](double v) { return std::exp(v - mx); });
  double sum = 0.0;
  for (double v : e) sum += v;
  for (double& v : e) v /= sum;
  return e;
}

LossKind loss_for(OutputActivation a) {
  return a == OutputActivation::Linear ? LossKind::Mse : LossKind::CrossEntropy;
}

LossResult output_loss(const ForwardTrace& trace, const Target& target, LossKind kind,
                       double tolerance) {
  if (loss_for(trace.output) != kind) {
    throw std::invalid_argument("output_loss: MSE requires a linear output and cross-entropy a "
                                "softmax output");
  }
  const Vec& y = trace.y;
  LossResult r;
  if (kind == LossKind::Mse) {
    const Vec* t = std::get_if<Vec>(&target);
    if (t == nullptr) throw std::invalid_argument("output_loss: MSE needs a vector target");
    if (t->size() != y.size()) {
      throw DimensionError("output_loss: target length " + std::to_string(t->size()) +
                           " vs output " + std::to_string(y.size()));
    }
    r.output_delta = y - *t;
    r.loss = 0.5 * dot(r.output_delta, r.output_delta);
    double worst = 0.0;
    for (double d : r.output_delta) worst = std::max(worst, std::abs(d));
    r.correct = worst < tolerance;
  } else {
    const std::size_t* cls = std::get_if<std::size_t>(&target);
    if (cls == nullptr) throw std::invalid_argument("output_loss: cross-entropy needs a class");
    if (*cls >= y.size()) {
      throw DimensionError("output_loss: class " + std::to_string(*cls) + " out of range for " +
                           std::to_string(y.size()) + " outputs");
    }
    r.output_delta = y;
    r.output_delta[*cls] -= 1.0;
    // log-sum-exp form keeps the loss finite when y[cls] underflows
    const Vec& o = trace.out_pre;
    const double mx = *std::max_element(o.begin(), o.end());
    double sum = 0.0;
    for (double v : o) sum += std::exp(v - mx);
    r.loss = mx + std::log(sum) - o[*cls];
    r.correct = static_cast<std::size_t>(std::max_element(y.begin(), y.end()) - y.begin()) == *cls;
  }
  return r;
}

namespace {

void write_block(std::ostringstream& os, const char* name, std::span<const double> xs) {
  os << name;
  for (double x : xs) os << ' ' << format_double(x);
  os << '\n';
}

constexpr std::string_view kModelMagic = "srnreg-model 1";

}  // namespace

std::string serialize(const SrnParams& params) {
  params.validate();
  std::ostringstream os;
  os << kModelMagic << '\n';
  os << "n_in " << params.n_in() << '\n';
  os << "n_hid " << params.n_hid() << '\n';
  os << "n_out " << params.n_out() << '\n';
  os << "hidden tanh\n";
  os << "output " << to_string(params.output) << '\n';
  os << "seed " << params.seed << '\n';
  write_block(os, "w_in", params.w_in.span());
  write_block(os, "w_rec", params.w_rec.span());
  write_block(os, "w_out", params.w_out.span());
  write_block(os, "b", params.b.span());
  return os.str();
}

SrnParams deserialize(std::string_view text) {
  std::map<std::string, std::vector<std::string_view>, std::less<>> fields;
  auto lines = split(text, '\n');
  if (lines.empty() || trim(lines[0]) != kModelMagic) {
    throw ParseError("model: missing header line '" + std::string(kModelMagic) + "'");
  }
  for (std::size_t i = 1; i < lines.size(); ++i) {
    auto line = trim(lines[i]);
    if (line.empty()) continue;
    auto parts = split(line, ' ');
    std::string key(parts[0]);
    if (fields.count(key)) throw ParseError("model: duplicate field '" + key + "'");
    fields[key] = std::vector<std::string_view>(parts.begin() + 1, parts.end());
  }
  auto scalar = [&](const char* key) -> std::string_view {
    auto it = fields.find(key);
    if (it == fields.end()) throw ParseError(std::string("model: missing field '") + key + "'");
    if (it->second.size() != 1) throw ParseError(std::string("model: field '") + key + "' must have one value");
    return it->second[0];
  };
  auto count = [&](const char* key) -> std::size_t {
    long long v = parse_int(scalar(key));
    if (v <= 0) throw ParseError(std::string("model: '") + key + "' must be positive");
    return static_cast<std::size_t>(v);
  };
  const std::size_t n_in = count("n_in"), n_hid = count("n_hid"), n_out = count("n_out");
  if (scalar("hidden") != "tanh") throw ParseError("model: only tanh hidden units are supported");
  SrnParams p = make_zero_params(n_in, n_hid, n_out, parse_output_activation(scalar("output")));
  {
    auto s = scalar("seed");
    std::uint64_t seed = 0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), seed);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size()) throw ParseError("model: bad seed");
    p.seed = seed;
  }
  auto block = [&](const char* key, std::span<double> dst) {
    auto it = fields.find(key);
    if (it == fields.end()) throw ParseError(std::string("model: missing block '") + key + "'");
    if (it->second.size() != dst.size()) {
      throw ParseError(std::string("model: block '") + key + "' has " +
                       std::to_string(it->second.size()) + " values, expected " +
                       std::to_string(dst.size()));
    }
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = parse_double(it->second[i]);
  };
  block("w_in", p.w_in.span());
  block("w_rec", p.w_rec.span());
  block("w_out", p.w_out.span());
  block("b", p.b.span());
  return p;
}

void save_model(const SrnParams& params, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
  out << serialize(params);
}

SrnParams load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open model file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return deserialize(ss.str());
}

}  // namespace srnreg
