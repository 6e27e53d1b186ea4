// Command-line front end: parse a declarative JSON problem spec, dispatch to
// the library, and emit a machine-readable result document.
//
// Contract highlights:
//   - exit 0 on success, 1 on spec/parse/input errors, 2 on domain errors;
//   - errors print exactly one line: "error code=<code> message=<text>";
//   - numeric fields render with 17 significant digits and are byte-identical
//     across reruns of the same spec + flags + seed (wall time excluded);
//   - --bits rescales information quantities (entropies, divergences, rates,
//     free energies) by 1/log 2 at render time; coordinates are never scaled.

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include <ldgeom/ldgeom.hpp>

namespace {

using json = nlohmann::ordered_json;
using ldgeom::Matrix;
using ldgeom::Vector;
using Vec = Vector<double>;
using Mat = Matrix<double>;

// ---------------------------------------------------------------------------
// Rendering: 17-significant-digit decimals, non-finite values as null.

std::string render_double(double v) {
  if (!std::isfinite(v)) return "null";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void dump_json(const json& node, std::ostream& os, int indent) {
  const std::string pad(static_cast<std::size_t>(indent), ' ');
  const std::string inner(static_cast<std::size_t>(indent) + 2, ' ');
  switch (node.type()) {
    case json::value_t::object: {
      if (node.empty()) {
        os << "{}";
        return;
      }
      os << "{\n";
      bool first = true;
      for (const auto& [key, value] : node.items()) {
        if (!first) os << ",\n";
        first = false;
        os << inner << json(key).dump() << ": ";
        dump_json(value, os, indent + 2);
      }
      os << "\n" << pad << "}";
      return;
    }
    case json::value_t::array: {
      if (node.empty()) {
        os << "[]";
        return;
      }
      const bool flat = std::all_of(node.begin(), node.end(),
                                    [](const json& e) { return e.is_primitive(); });
      if (flat) {
        os << "[";
        for (std::size_t i = 0; i < node.size(); ++i) {
          if (i) os << ", ";
          dump_json(node[i], os, indent);
        }
        os << "]";
        return;
      }
      os << "[\n";
      for (std::size_t i = 0; i < node.size(); ++i) {
        if (i) os << ",\n";
        os << inner;
        dump_json(node[i], os, indent + 2);
      }
      os << "\n" << pad << "]";
      return;
    }
    case json::value_t::number_float:
      os << render_double(node.get<double>());
      return;
    default:
      os << node.dump();
      return;
  }
}

// Flatten a result tree into "field,value" CSV rows.
void flatten_csv(const json& node, const std::string& path, std::ostream& os) {
  if (node.is_object()) {
    for (const auto& [key, value] : node.items())
      flatten_csv(value, path.empty() ? key : path + "." + key, os);
  } else if (node.is_array()) {
    for (std::size_t i = 0; i < node.size(); ++i)
      flatten_csv(node[i], path + "[" + std::to_string(i) + "]", os);
  } else if (node.is_number_float()) {
    os << path << "," << render_double(node.get<double>()) << "\n";
  } else {
    os << path << "," << node.dump() << "\n";
  }
}

// ---------------------------------------------------------------------------
// Input digest: FNV-1a over the raw spec bytes.

std::string fnv1a_digest(const std::string& bytes) {
  std::uint64_t h = UINT64_C(0xcbf29ce484222325);
  for (unsigned char c : bytes) {
    h ^= c;
    h *= UINT64_C(0x100000001b3);
  }
  char buf[32];
  std::snprintf(buf, sizeof(buf), "fnv1a64:%016llx", static_cast<unsigned long long>(h));
  return buf;
}

// ---------------------------------------------------------------------------
// Spec access helpers.  Shape errors are InputErrors (exit 1).

[[noreturn]] void spec_error(const std::string& message) {
  throw ldgeom::InputError("spec_error", message);
}

const json& require_field(const json& spec, const char* name) {
  const auto it = spec.find(name);
  if (it == spec.end()) spec_error(std::string("missing required field '") + name + "'");
  return *it;
}

double to_scalar(const json& node, const char* name) {
  if (!node.is_number()) spec_error(std::string("field '") + name + "' must be a number");
  return node.get<double>();
}

Vec to_vec(const json& node, const char* name) {
  if (!node.is_array() || node.empty())
    spec_error(std::string("field '") + name + "' must be a nonempty array of numbers");
  Vec v(static_cast<Eigen::Index>(node.size()));
  for (std::size_t i = 0; i < node.size(); ++i) {
    if (!node[i].is_number())
      spec_error(std::string("field '") + name + "' must contain only numbers");
    v(static_cast<Eigen::Index>(i)) = node[i].get<double>();
  }
  return v;
}

// A matrix is a list of equally long rows; a flat numeric list is one row.
Mat to_mat(const json& node, const char* name) {
  if (!node.is_array() || node.empty())
    spec_error(std::string("field '") + name + "' must be a nonempty array");
  if (node[0].is_number()) {
    const Vec row = to_vec(node, name);
    Mat m(1, row.size());
    m.row(0) = row.transpose();
    return m;
  }
  const std::size_t rows = node.size();
  const std::size_t cols = node[0].is_array() ? node[0].size() : 0;
  if (cols == 0) spec_error(std::string("field '") + name + "' has an empty first row");
  Mat m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (std::size_t i = 0; i < rows; ++i) {
    if (!node[i].is_array() || node[i].size() != cols)
      spec_error(std::string("field '") + name + "' must have equally long rows");
    for (std::size_t j = 0; j < cols; ++j) {
      if (!node[i][j].is_number())
        spec_error(std::string("field '") + name + "' must contain only numbers");
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = node[i][j].get<double>();
    }
  }
  return m;
}

// Seeds are 64-bit; JSON doubles lose precision past 2^53, so strings
// ("123", "0xdeadbeef") are accepted too.
std::uint64_t to_seed(const json& node) {
  try {
    if (node.is_number_unsigned()) return node.get<std::uint64_t>();
    if (node.is_number_integer()) {
      const auto s = node.get<std::int64_t>();
      if (s < 0) spec_error("seed must be nonnegative");
      return static_cast<std::uint64_t>(s);
    }
    if (node.is_string()) return std::stoull(node.get<std::string>(), nullptr, 0);
  } catch (const std::exception&) {
  }
  spec_error("seed must be an unsigned integer or a decimal/hex string");
}

json vec_json(const Vec& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

json mat_json(const Mat& m) {
  json a = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) a.push_back(vec_json(m.row(i).transpose()));
  return a;
}

// ---------------------------------------------------------------------------
// Merged run options (CLI flags override spec fields).

struct RunOptions {
  std::string format = "json";
  bool bits = false;
  std::optional<std::string> seed_flag;
  std::optional<double> tol_flag;
  std::optional<int> max_iter_flag;

  double unit = 1.0;  // 1 for nats, 1/log 2 for bits

  ldgeom::SolveOptions<double> solver(const json& spec) const {
    ldgeom::SolveOptions<double> opts;
    if (spec.contains("tol")) opts.tol = to_scalar(spec["tol"], "tol");
    if (spec.contains("max_iter")) {
      const double m = to_scalar(spec["max_iter"], "max_iter");
      opts.max_iter = static_cast<int>(m);
    }
    if (tol_flag) opts.tol = *tol_flag;
    if (max_iter_flag) opts.max_iter = *max_iter_flag;
    if (!(opts.tol > 0) || opts.max_iter < 1)
      spec_error("solver overrides need tol > 0 and max_iter >= 1");
    return opts;
  }

  std::uint64_t seed(const json& spec) const {
    if (seed_flag) {
      try {
        return std::stoull(*seed_flag, nullptr, 0);
      } catch (const std::exception&) {
        spec_error("--seed must be an unsigned decimal or hex integer");
      }
    }
    if (spec.contains("seed")) return to_seed(spec["seed"]);
    return 0;
  }
};

ldgeom::ProbabilityVector<double> prior_of(const json& spec) {
  return ldgeom::ProbabilityVector<double>(to_vec(require_field(spec, "p"), "p"));
}

ldgeom::ObservableMatrix<double> observable_of(const json& spec) {
  return ldgeom::ObservableMatrix<double>(to_mat(require_field(spec, "X"), "X"));
}

ldgeom::MomentPoint<double> moment_of(const json& node) {
  if (node.is_number()) return ldgeom::MomentPoint<double>((Vec(1) << node.get<double>()).finished());
  return ldgeom::MomentPoint<double>(to_vec(node, "x"));
}

// ---------------------------------------------------------------------------
// Subcommand implementations.  Each returns {"results": ..., "diagnostics": ...}.

json run_entropy(const json& spec, const RunOptions& opt) {
  const ldgeom::EmpiricalFrequency<double> nu(to_vec(require_field(spec, "nu"), "nu"));
  const auto p = spec.contains("p") ? prior_of(spec)
                                    : ldgeom::ProbabilityVector<double>::uniform(nu.size());
  json results;
  results["S"] = opt.unit * ldgeom::kl_divergence(nu, p);
  results["H"] = opt.unit * ldgeom::shannon_entropy(nu);
  results["gain_vs_uniform"] = opt.unit * ldgeom::gain_frequency_vs_uniform(nu);
  results["gain_vs_prior"] = opt.unit * ldgeom::gain_frequency_vs_prior(nu, p);
  if (spec.contains("X")) {
    const auto X = observable_of(spec);
    const auto opts = opt.solver(spec);
    const ldgeom::MomentPoint<double> x(X.matrix() * nu.values());
    results["mean"] = vec_json(x.values());
    results["gain_mean"] = opt.unit * ldgeom::gain_mean_vs_prior(x, X, p, opts);
    results["gain_conditional"] =
        opt.unit * ldgeom::gain_frequency_given_mean(nu, X, p, opts);
  }
  return json{{"results", std::move(results)}, {"diagnostics", json::object()}};
}

json run_tilt(const json& spec, const RunOptions& opt) {
  const auto p = prior_of(spec);
  const ldgeom::EnergyVector<double> mu(to_vec(require_field(spec, "mu"), "mu"));
  const auto tilted = ldgeom::tilt(p, mu);
  json results;
  results["tilted"] = vec_json(tilted.values());
  results["F"] = opt.unit * ldgeom::free_energy(mu, p);
  return json{{"results", std::move(results)}, {"diagnostics", json::object()}};
}

json run_contract(const json& spec, const RunOptions& opt) {
  const auto p = prior_of(spec);
  const auto X = observable_of(spec);
  const auto x = moment_of(require_field(spec, "x"));
  const auto opts = opt.solver(spec);

  const auto sol = ldgeom::solve_conjugate(x, X, p, opts);
  const auto nu_star = ldgeom::information_projection(x, X, p, opts);
  json results;
  results["alpha"] = vec_json(sol.alpha.values());
  results["phi"] = opt.unit * ldgeom::moment_rate(x, X, p, opts);
  results["psi"] = opt.unit * ldgeom::log_partition(sol.alpha, X, p);
  results["nu_star"] = vec_json(nu_star.values());
  results["covariance"] = mat_json(ldgeom::tilted_covariance(sol.alpha, X, p));
  results["metric"] = mat_json(ldgeom::moment_metric(x, X, p, opts));
  json diagnostics;
  diagnostics["iterations"] = sol.iterations;
  diagnostics["residual"] = sol.residual;
  return json{{"results", std::move(results)}, {"diagnostics", std::move(diagnostics)}};
}

json run_project(const json& spec, const RunOptions& opt) {
  const auto p = prior_of(spec);
  const auto X = observable_of(spec);
  const ldgeom::EmpiricalFrequency<double> nu(to_vec(require_field(spec, "nu"), "nu"));
  const auto x = spec.contains("x") ? moment_of(spec["x"])
                                    : ldgeom::MomentPoint<double>(X.matrix() * nu.values());
  const auto opts = opt.solver(spec);

  const auto split = ldgeom::pythagorean_decompose(nu, x, X, p, opts);
  json results;
  results["total"] = opt.unit * split.total;
  results["excess"] = opt.unit * split.excess;
  results["projection"] = opt.unit * split.projection;
  results["projector"] = vec_json(split.projector.values());
  results["moment"] = vec_json(x.values());
  json diagnostics;
  diagnostics["fiber_residual"] =
      (X.matrix() * nu.values() - x.values()).lpNorm<Eigen::Infinity>();
  return json{{"results", std::move(results)}, {"diagnostics", std::move(diagnostics)}};
}

json run_chain(const json& spec, const RunOptions& opt) {
  const json& nu_node = require_field(spec, "nu");
  const json& p_node = require_field(spec, "p");
  Eigen::Index n1 = 0, n2 = 0;
  Vec nu_flat, p_flat;
  if (nu_node.is_array() && !nu_node.empty() && nu_node[0].is_array()) {
    const Mat joint = to_mat(nu_node, "nu");
    n1 = joint.rows();
    n2 = joint.cols();
    nu_flat = joint.reshaped<Eigen::RowMajor>().transpose();
    const Mat pj = to_mat(p_node, "p");
    if (pj.rows() != n1 || pj.cols() != n2)
      spec_error("'p' must have the same shape as 'nu'");
    p_flat = pj.reshaped<Eigen::RowMajor>().transpose();
  } else {
    if (!spec.contains("n1") || !spec.contains("n2"))
      spec_error("flat 'nu' needs explicit 'n1' and 'n2'");
    n1 = static_cast<Eigen::Index>(to_scalar(spec["n1"], "n1"));
    n2 = static_cast<Eigen::Index>(to_scalar(spec["n2"], "n2"));
    nu_flat = to_vec(nu_node, "nu");
    p_flat = to_vec(p_node, "p");
  }
  const ldgeom::ProductStateLayout layout(n1, n2);
  const ldgeom::EmpiricalFrequency<double> nu(nu_flat);
  const ldgeom::ProbabilityVector<double> p(p_flat);
  const auto terms = ldgeom::entropy_chain(nu, p, layout);
  json results;
  results["marginal"] = opt.unit * terms.marginal;
  results["weighted_conditional"] = opt.unit * terms.weighted_conditional;
  results["total"] = opt.unit * terms.total();
  json diagnostics;
  diagnostics["n1"] = n1;
  diagnostics["n2"] = n2;
  return json{{"results", std::move(results)}, {"diagnostics", std::move(diagnostics)}};
}

json run_vertices(const json& spec, const RunOptions&) {
  const auto X = observable_of(spec);
  const auto x = moment_of(require_field(spec, "x"));
  const auto verts = ldgeom::enumerate_vertices(X, x);
  json cols = json::array();
  for (Eigen::Index j = 0; j < verts.count(); ++j) cols.push_back(vec_json(verts.vertices.col(j)));
  json results;
  results["count"] = verts.count();
  results["dimension"] = X.states() - X.observables() - 1;
  results["vertices"] = std::move(cols);
  return json{{"results", std::move(results)}, {"diagnostics", json::object()}};
}

json run_chart(const json& spec, const RunOptions& opt) {
  const auto p = prior_of(spec);
  const auto X = observable_of(spec);
  const auto x = moment_of(require_field(spec, "x"));
  const auto opts = opt.solver(spec);

  const json& vnode = require_field(spec, "vertices");
  if (!vnode.is_array() || vnode.empty() || !vnode[0].is_array())
    spec_error("'vertices' must be a list of vertex columns");
  Mat Q(static_cast<Eigen::Index>(vnode[0].size()), static_cast<Eigen::Index>(vnode.size()));
  for (std::size_t j = 0; j < vnode.size(); ++j) {
    const Vec col = to_vec(vnode[j], "vertices");
    if (col.size() != Q.rows()) spec_error("'vertices' columns must have equal length");
    Q.col(static_cast<Eigen::Index>(j)) = col;
  }
  const auto chart = ldgeom::build_chart(Q, X, x);

  json results, diagnostics;
  std::optional<ldgeom::MixtureCoordinate<double>> eta;
  if (spec.contains("eta")) {
    eta.emplace(to_vec(spec["eta"], "eta"));
    const double s = ldgeom::chart_entropy(*eta, chart, p, X, x, opts);
    const auto chi_eta = ldgeom::chart_conjugate(*eta, chart, p);
    results["S_X"] = opt.unit * s;
    results["chi_of_eta"] = vec_json(chi_eta.values());
    if (!spec.contains("chi")) {
      // Round trip through the conjugate for the Fenchel-Young diagnostic.
      const double f = ldgeom::chart_free_energy(chi_eta, chart, p, X, x, opts);
      results["F_X"] = opt.unit * f;
      diagnostics["fenchel_gap"] = f + s - eta->values().dot(chi_eta.values());
    }
  }
  if (spec.contains("chi")) {
    const ldgeom::ChartEnergy<double> chi(to_vec(spec["chi"], "chi"));
    const double f = ldgeom::chart_free_energy(chi, chart, p, X, x, opts);
    results["F_X"] = opt.unit * f;
    if (eta) {
      const double s = ldgeom::chart_entropy(*eta, chart, p, X, x, opts);
      diagnostics["fenchel_gap"] = f + s - eta->values().dot(chi.values());
    }
  }
  if (spec.contains("eta2")) {
    if (!eta) spec_error("'eta2' needs 'eta' to compare against");
    const ldgeom::MixtureCoordinate<double> eta2(to_vec(spec["eta2"], "eta2"));
    results["divergence"] =
        opt.unit * ldgeom::chart_divergence(*eta, eta2, chart, p, X, x, opts);
  }
  if (results.empty()) spec_error("'chart' needs at least one of 'eta' or 'chi'");
  return json{{"results", std::move(results)}, {"diagnostics", std::move(diagnostics)}};
}

json run_markov(const json& spec, const RunOptions& opt) {
  const ldgeom::MarkovKernel<double> P(to_mat(require_field(spec, "kernel"), "kernel"));
  json results, diagnostics;
  results["stationary"] = vec_json(ldgeom::stationary_distribution(P).values());
  results["stationary_pair"] = mat_json(ldgeom::stationary_pair(P).matrix());

  if (spec.contains("u")) {
    const ldgeom::TiltMatrix<double> u(to_mat(spec["u"], "u"));
    const auto sp = ldgeom::markov_spectral(u, P);
    results["F2"] = opt.unit * sp.log_lambda;
    results["gradient"] = mat_json(ldgeom::markov_gradient(u, P).matrix());
    diagnostics["power_iterations"] = sp.iterations;
  }

  std::optional<ldgeom::PairFrequency<double>> nu;
  if (spec.contains("seq")) {
    const json& snode = spec["seq"];
    if (!snode.is_array() || snode.empty()) spec_error("'seq' must be a nonempty array");
    std::vector<int> seq;
    seq.reserve(snode.size());
    for (const auto& e : snode) {
      if (!e.is_number_integer()) spec_error("'seq' must contain integer state indices");
      seq.push_back(e.get<int>());
    }
    nu.emplace(ldgeom::pair_frequency_from_sequence<double>(seq, P.states()));
    results["pair_frequency"] = mat_json(nu->matrix());
  } else if (spec.contains("nu")) {
    nu.emplace(to_mat(spec["nu"], "nu"));
  }
  if (nu) results["S2"] = opt.unit * ldgeom::pair_rate(*nu, P);
  return json{{"results", std::move(results)}, {"diagnostics", std::move(diagnostics)}};
}

json run_verify(const json& spec, const RunOptions& opt) {
  ldgeom::SampleSpec<double> sample;
  const bool has_p = spec.contains("p"), has_k = spec.contains("kernel");
  if (has_p == has_k) spec_error("'verify' needs exactly one of 'p' or 'kernel'");
  if (has_p) sample.prior = prior_of(spec);
  if (has_k) sample.kernel = ldgeom::MarkovKernel<double>(to_mat(spec["kernel"], "kernel"));

  const json& sizes = require_field(spec, "sample_sizes");
  if (!sizes.is_array() || sizes.empty()) spec_error("'sample_sizes' must be a nonempty array");
  for (const auto& e : sizes) {
    if (!e.is_number_integer()) spec_error("'sample_sizes' must contain integers");
    sample.sample_sizes.push_back(e.get<long>());
  }
  sample.replicas = static_cast<long>(to_scalar(require_field(spec, "replicas"), "replicas"));
  sample.center = to_vec(require_field(spec, "center"), "center");
  sample.delta = to_scalar(require_field(spec, "delta"), "delta");
  if (!(sample.delta > 0)) spec_error("'delta' must be positive");
  sample.master_seed = opt.seed(spec);

  std::string target = "frequency";
  if (spec.contains("target")) {
    if (!spec["target"].is_string()) spec_error("'target' must be a string");
    target = spec["target"].get<std::string>();
  }
  std::optional<ldgeom::ObservableMatrix<double>> X;
  if (target == "moment") {
    sample.target = ldgeom::TargetKind::Moment;
    X = observable_of(spec);
    sample.observable = X;
  } else if (target != "frequency") {
    spec_error("'target' must be \"frequency\" or \"moment\"");
  }

  if (spec.contains("initial")) {
    const json& init = spec["initial"];
    if (init.is_string() && init.get<std::string>() == "stationary")
      sample.initial = ldgeom::StationaryStart{};
    else if (init.is_number_integer())
      sample.initial = init.get<int>();
    else
      spec_error("'initial' must be a state index or \"stationary\"");
  }
  if (spec.contains("threads"))
    sample.threads = static_cast<int>(to_scalar(spec["threads"], "threads"));

  // Analytic reference: Sanov for iid frequency balls, the contracted rate
  // for iid moment balls; chain occupation rates have no closed form here.
  std::function<double(const Vec&)> analytic;
  if (has_p && sample.target == ldgeom::TargetKind::Frequency) {
    const auto p = *sample.prior;
    analytic = [p](const Vec& center) {
      return ldgeom::kl_divergence(ldgeom::EmpiricalFrequency<double>(center), p);
    };
  } else if (has_p) {
    const auto p = *sample.prior;
    const auto Xo = *X;
    const auto opts = opt.solver(spec);
    analytic = [p, Xo, opts](const Vec& center) {
      return ldgeom::moment_rate(ldgeom::MomentPoint<double>(center), Xo, p, opts);
    };
  }

  const auto est = ldgeom::estimate_rate<double>(sample, analytic);
  json results;
  results["analytic_rate"] = opt.unit * est.analytic_rate;
  json rungs = json::array();
  for (const auto& r : est.rungs) {
    json row;
    row["N"] = r.N;
    row["hits"] = r.hits;
    row["replicas"] = r.replicas;
    row["p_hat"] = r.p_hat;
    row["wilson_center"] = r.wilson_center;
    row["wilson_halfwidth"] = r.wilson_halfwidth;
    row["rate"] = opt.unit * r.rate;
    row["rate_lower"] = opt.unit * r.rate_lower;
    row["rate_upper"] = opt.unit * r.rate_upper;
    row["insufficient_hits"] = r.insufficient_hits;
    rungs.push_back(std::move(row));
  }
  results["rungs"] = std::move(rungs);
  json diagnostics;
  diagnostics["target"] = target;
  diagnostics["seed"] = sample.master_seed;
  diagnostics["threads"] = sample.threads;
  return json{{"results", std::move(results)}, {"diagnostics", std::move(diagnostics)}};
}

// ---------------------------------------------------------------------------

json dispatch(const std::string& command, const json& spec, const RunOptions& opt) {
  if (command == "entropy") return run_entropy(spec, opt);
  if (command == "tilt") return run_tilt(spec, opt);
  if (command == "contract") return run_contract(spec, opt);
  if (command == "project") return run_project(spec, opt);
  if (command == "chain") return run_chain(spec, opt);
  if (command == "vertices") return run_vertices(spec, opt);
  if (command == "chart") return run_chart(spec, opt);
  if (command == "markov") return run_markov(spec, opt);
  if (command == "verify") return run_verify(spec, opt);
  spec_error("unknown command '" + command + "'");
}

void emit(const json& doc, const std::string& command, const std::string& format,
          std::ostream& os) {
  if (format == "json") {
    dump_json(doc, os, 0);
    os << "\n";
    return;
  }
  // CSV: comment header, then either the verify rung table or field,value rows.
  os << "# command=" << command << "\n";
  os << "# input_digest=" << doc["input_digest"].get<std::string>() << "\n";
  os << "# units=" << doc["units"].get<std::string>() << "\n";
  if (command == "verify") {
    os << "# analytic_rate=" << render_double(doc["results"]["analytic_rate"].get<double>())
       << "\n";
    os << "N,hits,replicas,p_hat,wilson_center,wilson_halfwidth,rate,rate_lower,"
          "rate_upper,insufficient_hits\n";
    for (const auto& r : doc["results"]["rungs"]) {
      os << r["N"].get<long>() << "," << r["hits"].get<long>() << ","
         << r["replicas"].get<long>() << "," << render_double(r["p_hat"].get<double>()) << ","
         << render_double(r["wilson_center"].get<double>()) << ","
         << render_double(r["wilson_halfwidth"].get<double>()) << ","
         << render_double(r["rate"].get<double>()) << ","
         << render_double(r["rate_lower"].get<double>()) << ","
         << render_double(r["rate_upper"].get<double>()) << ","
         << (r["insufficient_hits"].get<bool>() ? "true" : "false") << "\n";
    }
  } else {
    os << "field,value\n";
    flatten_csv(doc["results"], "", os);
    flatten_csv(doc["diagnostics"], "diagnostics", os);
  }
  os << "# wall_time_ms=" << render_double(doc["wall_time_ms"].get<double>()) << "\n";
}

int fail(const ldgeom::Error& e, int code) {
  std::cerr << "error code=" << e.code() << " message=" << e.what() << "\n";
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ldgeom: rate functions, duality, and information projections "
               "on finite state spaces"};
  app.fallthrough();
  app.require_subcommand(1);

  std::string input, output, format = "json";
  bool bits = false;
  std::string seed_flag;
  double tol_flag = -1;
  int max_iter_flag = -1;
  app.add_option("--input", input, "problem spec file (JSON)");
  app.add_option("--output", output, "write the result document here instead of stdout");
  app.add_option("--format", format, "output format: json or csv")
      ->check(CLI::IsMember({"json", "csv"}));
  app.add_flag("--bits", bits, "render information quantities in bits instead of nats");
  app.add_option("--seed", seed_flag, "master seed override (decimal or 0x-hex)");
  app.add_option("--tol", tol_flag, "conjugate solver tolerance override");
  app.add_option("--max-iter", max_iter_flag, "conjugate solver iteration cap override");

  const std::vector<std::pair<const char*, const char*>> commands = {
      {"entropy", "entropy rate and information gains of a frequency"},
      {"tilt", "exponential tilt of a prior and its free energy"},
      {"contract", "conjugate tilt, rate, and metric at a moment value"},
      {"project", "information projection and Pythagorean split"},
      {"chain", "entropy chain rule over a product state space"},
      {"vertices", "vertex enumeration of a fiber polytope"},
      {"chart", "entropy and free energy in simplex chart coordinates"},
      {"markov", "pair-measure rate and spectral free energy of a chain"},
      {"verify", "Monte Carlo decay-rate estimation ladder"},
  };
  for (const auto& [name, desc] : commands) app.add_subcommand(name, desc);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error code=usage message=" << e.what() << "\n";
    return 1;
  }
  const std::string command = app.get_subcommands().front()->get_name();

  RunOptions opt;
  opt.format = format;
  opt.bits = bits;
  opt.unit = bits ? 1.0 / std::log(2.0) : 1.0;
  if (!seed_flag.empty()) opt.seed_flag = seed_flag;
  if (tol_flag > 0) opt.tol_flag = tol_flag;
  if (max_iter_flag > 0) opt.max_iter_flag = max_iter_flag;

  try {
    if (input.empty())
      throw ldgeom::InputError("usage", "--input <spec file> is required");
    std::ifstream in(input, std::ios::binary);
    if (!in) throw ldgeom::InputError("io_error", "cannot open spec file '" + input + "'");
    std::ostringstream buffer;
    buffer << in.rdbuf();
    const std::string bytes = buffer.str();

    json spec;
    try {
      spec = json::parse(bytes);
    } catch (const json::exception& e) {
      throw ldgeom::InputError("parse_error", e.what());
    }
    if (!spec.is_object())
      throw ldgeom::InputError("parse_error", "spec file must hold a JSON object");

    const auto start = std::chrono::steady_clock::now();
    json body = dispatch(command, spec, opt);
    const auto stop = std::chrono::steady_clock::now();

    json doc;
    doc["command"] = command;
    doc["input_digest"] = fnv1a_digest(bytes);
    doc["units"] = bits ? "bits" : "nats";
    doc["results"] = std::move(body["results"]);
    doc["diagnostics"] = std::move(body["diagnostics"]);
    doc["wall_time_ms"] =
        std::chrono::duration<double, std::milli>(stop - start).count();

    if (output.empty()) {
      emit(doc, command, format, std::cout);
    } else {
      std::ofstream out(output, std::ios::binary);
      if (!out)
        throw ldgeom::InputError("io_error", "cannot open output file '" + output + "'");
      emit(doc, command, format, out);
    }
    return 0;
  } catch (const ldgeom::InputError& e) {
    return fail(e, 1);
  } catch (const ldgeom::DomainError& e) {
    return fail(e, 2);
  } catch (const ldgeom::Error& e) {
    return fail(e, 1);
  } catch (const std::exception& e) {
    std::cerr << "error code=internal message=" << e.what() << "\n";
    return 1;
  }
}
