#pragma once

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <system_error>
#include <vector>

#include <json.hpp>

#include "inertial_prox/bench.hpp"
#include "inertial_prox/engine.hpp"
#include "inertial_prox/params.hpp"

namespace iprox::cli {

namespace exit_code {
inline constexpr int kOk = 0;
inline constexpr int kRejected = 2;
inline constexpr int kMaxIter = 3;
inline constexpr int kDiverged = 4;
inline constexpr int kCertificate = 5;
inline constexpr int kUsage = 64;
inline constexpr int kIo = 74;
}  // namespace exit_code

/// Malformed or inconsistent experiment configuration.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Failure reading the config or writing outputs.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class ProblemFamily { BasisPursuit, TvLs, Feasibility, LinearMonotone };

struct Dims {
  Index n = 0;            // basis_pursuit, tv_ls
  Index m = 0;            // basis_pursuit, tv_ls
  Index sparsity = 0;     // basis_pursuit; 0 = default
  Index p = 0;            // tv_ls
  Index pieces = 5;       // tv_ls
  std::optional<double> noise_scale;  // tv_ls
  double gamma = 0.01;    // tv_ls
  double angle = 0.0;     // feasibility
  Index dim = 0;          // linear_monotone
  bool zero_start = false;  // linear_monotone
};

struct ExperimentConfig {
  ProblemFamily family = ProblemFamily::LinearMonotone;
  Dims dims;
  std::vector<MethodSpec> methods;
  Seed seed;
  double tol = 1e-8;
  std::size_t max_iter = 1000;
  std::string output_path;
};

namespace detail {

inline void reject_unknown(const nlohmann::json& obj, const std::set<std::string>& allowed, const std::string& where) {
  if (!obj.is_object()) throw ConfigError(where + ": expected an object");
  for (const auto& [key, _] : obj.items()) {
    if (!allowed.count(key)) throw ConfigError(where + ": unknown key '" + key + "'");
  }
}

inline double finite_number(const nlohmann::json& obj, const std::string& key, const std::string& where) {
  const auto& v = obj.at(key);
  if (!v.is_number()) throw ConfigError(where + "." + key + ": expected a number");
  const double d = v.get<double>();
  if (!std::isfinite(d)) throw ConfigError(where + "." + key + ": must be finite");
  return d;
}

inline Index positive_int(const nlohmann::json& obj, const std::string& key, const std::string& where) {
  const auto& v = obj.at(key);
  if (!v.is_number_integer() || v.get<long long>() < 1) throw ConfigError(where + "." + key + ": expected a positive integer");
  return static_cast<Index>(v.get<long long>());
}

inline Family default_family(ProblemFamily f) {
  switch (f) {
    case ProblemFamily::BasisPursuit: return Family::PMM;
    case ProblemFamily::TvLs: return Family::TvAdmm;
    case ProblemFamily::Feasibility: return Family::DR;
    case ProblemFamily::LinearMonotone: return Family::GenericPPA;
  }
  return Family::GenericPPA;
}

inline Family parse_method_family(const std::string& s) {
  if (s == "PMM") return Family::PMM;
  if (s == "TvAdmm") return Family::TvAdmm;
  if (s == "DR") return Family::DR;
  if (s == "PDHG") return Family::PDHG;
  if (s == "GenericPPA") return Family::GenericPPA;
  throw ConfigError("methods[].family: unknown family '" + s + "'");
}

}  // namespace detail

/// Parses an experiment document. Unknown keys and non-finite numbers are rejected;
/// parameter-region checks are left to the commands.
inline ExperimentConfig parse_config(const nlohmann::json& j) {
  using detail::finite_number;
  using detail::positive_int;
  detail::reject_unknown(j, {"family", "dims", "methods", "seed", "tol", "max_iter", "output_path"}, "config");
  ExperimentConfig cfg;
  try {
    const auto fam = j.at("family").get<std::string>();
    const auto& dims = j.at("dims");
    if (fam == "basis_pursuit") {
      cfg.family = ProblemFamily::BasisPursuit;
      detail::reject_unknown(dims, {"N", "M", "sparsity"}, "dims");
      cfg.dims.n = positive_int(dims, "N", "dims");
      cfg.dims.m = positive_int(dims, "M", "dims");
      cfg.dims.sparsity = dims.contains("sparsity") ? positive_int(dims, "sparsity", "dims") : default_bp_sparsity(cfg.dims.m);
    } else if (fam == "tv_ls") {
      cfg.family = ProblemFamily::TvLs;
      detail::reject_unknown(dims, {"N", "M", "p", "pieces", "noise_scale", "gamma"}, "dims");
      cfg.dims.n = positive_int(dims, "N", "dims");
      cfg.dims.m = positive_int(dims, "M", "dims");
      cfg.dims.p = positive_int(dims, "p", "dims");
      if (dims.contains("pieces")) cfg.dims.pieces = positive_int(dims, "pieces", "dims");
      if (dims.contains("noise_scale")) cfg.dims.noise_scale = finite_number(dims, "noise_scale", "dims");
      if (dims.contains("gamma")) cfg.dims.gamma = finite_number(dims, "gamma", "dims");
    } else if (fam == "feasibility") {
      cfg.family = ProblemFamily::Feasibility;
      detail::reject_unknown(dims, {"angle"}, "dims");
      cfg.dims.angle = finite_number(dims, "angle", "dims");
    } else if (fam == "linear_monotone") {
      cfg.family = ProblemFamily::LinearMonotone;
      detail::reject_unknown(dims, {"dim", "start"}, "dims");
      cfg.dims.dim = positive_int(dims, "dim", "dims");
      if (dims.contains("start")) {
        const auto s = dims.at("start").get<std::string>();
        if (s != "zero" && s != "random") throw ConfigError("dims.start: expected \"zero\" or \"random\"");
        cfg.dims.zero_start = s == "zero";
      }
    } else {
      throw ConfigError("config.family: unknown family '" + fam + "'");
    }

    const auto& methods = j.at("methods");
    if (!methods.is_array()) throw ConfigError("config.methods: expected an array");
    for (const auto& m : methods) {
      detail::reject_unknown(m, {"name", "theta", "delta", "lambda", "rho", "family"}, "methods[]");
      MethodSpec spec;
      spec.name = m.at("name").get<std::string>();
      spec.params.theta = m.contains("theta") ? finite_number(m, "theta", "methods[]") : 0.0;
      spec.params.delta = m.contains("delta") ? finite_number(m, "delta", "methods[]") : 0.0;
      spec.params.lambda = m.contains("lambda") ? finite_number(m, "lambda", "methods[]") : 1.0;
      spec.params.rho = m.contains("rho") ? finite_number(m, "rho", "methods[]") : 1.0;
      spec.family = m.contains("family") ? detail::parse_method_family(m.at("family").get<std::string>())
                                         : detail::default_family(cfg.family);
      cfg.methods.push_back(std::move(spec));
    }

    if (j.contains("seed")) {
      const auto& s = j.at("seed");
      if (!s.is_number_unsigned() && !(s.is_number_integer() && s.get<long long>() >= 0)) {
        throw ConfigError("config.seed: expected a non-negative integer");
      }
      cfg.seed.value = s.get<std::uint64_t>();
    }
    if (j.contains("tol")) {
      cfg.tol = finite_number(j, "tol", "config");
      if (!(cfg.tol > 0.0)) throw ConfigError("config.tol: must be > 0");
    }
    if (j.contains("max_iter")) cfg.max_iter = static_cast<std::size_t>(positive_int(j, "max_iter", "config"));
    if (j.contains("output_path")) cfg.output_path = j.at("output_path").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  return cfg;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config file '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  return parse_config(j);
}

inline BenchInstance build_instance(const ExperimentConfig& cfg) {
  const Dims& d = cfg.dims;
  try {
    switch (cfg.family) {
      case ProblemFamily::BasisPursuit:
        return std::make_shared<const BasisPursuitInstance>(gen_basis_pursuit(d.n, d.m, d.sparsity, cfg.seed));
      case ProblemFamily::TvLs:
        return std::make_shared<const TvLsInstance>(gen_tv_ls(d.n, d.m, d.p, d.noise_scale, d.pieces, cfg.seed, d.gamma));
      case ProblemFamily::Feasibility:
        return std::make_shared<const FeasibilityInstance>(gen_two_subspace(d.angle));
      case ProblemFamily::LinearMonotone:
        return std::make_shared<const LinearMonotoneInstance>(gen_linear_monotone(d.dim, 1.0, cfg.seed, d.zero_start));
    }
  } catch (const InvalidArgument& e) {
    throw ConfigError(e.what());
  }
  throw ConfigError("unsupported family");
}

/// Shortest representation that round-trips to the same double.
inline std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc()) return "nan";
  return std::string(buf, ptr);
}

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

namespace detail {

inline std::filesystem::path prepare_output_dir(const std::string& dir) {
  if (dir.empty()) throw ConfigError("config.output_path is required for this command");
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir)) throw IoError("cannot create output directory '" + dir + "'");
  return std::filesystem::path(dir);
}

inline void write_file(const std::filesystem::path& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << contents;
  out.flush();
  if (!out) throw IoError("write to '" + path.string() + "' failed");
}

inline int status_exit(RunStatus s) {
  switch (s) {
    case RunStatus::Converged: return exit_code::kOk;
    case RunStatus::MaxIterReached: return exit_code::kMaxIter;
    case RunStatus::Diverged: return exit_code::kDiverged;
  }
  return exit_code::kDiverged;
}

inline nlohmann::json params_json(const InertialParams& p) {
  return {{"theta", p.theta}, {"delta", p.delta}, {"lambda", p.lambda}, {"rho", p.rho}};
}

/// Returns an exit code != 0 and prints why when any method is outside the region.
inline int check_methods(const ExperimentConfig& cfg, std::ostream& err) {
  for (const auto& m : cfg.methods) {
    const auto v = validate_params(m.params);
    if (!v) {
      err << "method '" << m.name << "': " << *v.violation << "\n";
      return exit_code::kRejected;
    }
  }
  return exit_code::kOk;
}

/// Runs `body`, mapping the error taxonomy onto exit codes.
template <class Body>
int guarded(std::ostream& err, Body&& body) {
  try {
    return body();
  } catch (const IoError& e) {
    err << "error: " << e.what() << "\n";
    return exit_code::kIo;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return exit_code::kUsage;
  } catch (const InvalidArgument& e) {
    err << "error: " << e.what() << "\n";
    return exit_code::kUsage;
  }
}

}  // namespace detail

/// Prints the admissible delta interval for theta and c1, c2. Exit 0 when
/// (theta, delta) lies in the region, 2 otherwise.
inline int cmd_validate(double theta, double delta, std::ostream& out, std::ostream& err) {
  if (!std::isfinite(theta) || !std::isfinite(delta)) {
    err << "error: theta and delta must be finite\n";
    return exit_code::kUsage;
  }
  out << std::setprecision(17);
  out << "theta = " << theta << "\ndelta = " << delta << "\n";
  if (theta >= 0.0 && theta < 1.0 / 3.0) {
    out << "admissible delta interval: (" << delta_lower_bound(theta) << ", 0]\n";
  } else {
    out << "admissible delta interval: none (theta must satisfy 0 <= theta < 1/3)\n";
  }
  const auto v = validate_params(theta, delta);
  const auto c = iprox::detail::raw_coefficients(theta, delta);
  out << "c1 = " << c.c1 << "\nc2 = " << c.c2 << "\n";
  if (!v) {
    out << "rejected: " << *v.violation << "\n";
    return exit_code::kRejected;
  }
  out << "ok\n";
  return exit_code::kOk;
}

/// Single run of the first (only) configured method. Writes record.json and
/// residuals.csv into output_path; the CSV carries gamma/gamma_bar columns
/// when the family has a known solution (linear_monotone, rho = 1).
inline int cmd_run(const std::string& config_path, std::ostream& out, std::ostream& err, bool bypass_validation = false) {
  return detail::guarded(err, [&] {
    const ExperimentConfig cfg = load_config(config_path);
    if (cfg.methods.size() != 1) throw ConfigError("run expects exactly one method");
    if (!bypass_validation) {
      if (int rc = detail::check_methods(cfg, err); rc != exit_code::kOk) return rc;
    }
    const auto dir = detail::prepare_output_dir(cfg.output_path);
    const MethodSpec& method = cfg.methods.front();
    const BenchInstance instance = build_instance(cfg);

    RunConfig rc;
    rc.max_iter = cfg.max_iter;
    rc.tol = cfg.tol;
    if (cfg.family == ProblemFamily::LinearMonotone && method.params.rho == 1.0) {
      rc.record_lyapunov = std::get<3>(instance)->x_star;
    }
    const RunRecord rec = run_method(instance, method, rc);

    nlohmann::json j;
    j["status"] = std::string(to_string(rec.status));
    j["iterations"] = rec.iterations_used;
    j["final_residual"] = rec.residuals.empty() ? 0.0 : rec.residuals.back();
    j["wall_time_s"] = rec.wall_time;
    j["method"] = method.name;
    j["family"] = std::string(to_string(method.family));
    j["params"] = detail::params_json(method.params);
    j["seed"] = cfg.seed.value;
    j["tol"] = cfg.tol;
    j["max_iter"] = cfg.max_iter;
    j["instance"] = describe(instance);
    j["generator"] = std::string(Rng::kVersion);
    detail::write_file(dir / "record.json", j.dump(2) + "\n");

    std::ostringstream csv;
    const bool lyap = rec.lyapunov.has_value();
    csv << (lyap ? "iter,residual,gamma,gamma_bar\n" : "iter,residual\n");
    for (std::size_t n = 0; n < rec.residuals.size(); ++n) {
      csv << n << ',' << format_double(rec.residuals[n]);
      if (lyap) {
        csv << ',' << format_double(rec.lyapunov->gamma[n]) << ',' << format_double(rec.lyapunov->gamma_bar[n]);
      }
      csv << '\n';
    }
    detail::write_file(dir / "residuals.csv", csv.str());

    out << method.name << ": " << to_string(rec.status) << " after " << rec.iterations_used << " iterations\n";
    return detail::status_exit(rec.status);
  });
}

/// Renders a comparison report; every column but wall_time_s is deterministic.
inline std::string report_csv(const ComparisonReport& report) {
  std::ostringstream csv;
  csv << "method,iterations,final_residual,wall_time_s,status\n";
  for (const auto& row : report.rows) {
    csv << csv_field(row.method) << ',' << row.iterations << ',' << format_double(row.final_residual) << ','
        << format_double(row.wall_time) << ',' << to_string(row.status) << '\n';
  }
  return csv.str();
}

/// Runs every configured method on one generated instance and writes
/// output_path/bench.csv.
inline int cmd_bench(const std::string& config_path, std::ostream& out, std::ostream& err) {
  return detail::guarded(err, [&] {
    const ExperimentConfig cfg = load_config(config_path);
    if (int rc = detail::check_methods(cfg, err); rc != exit_code::kOk) return rc;
    const auto dir = detail::prepare_output_dir(cfg.output_path);
    const BenchInstance instance = build_instance(cfg);
    RunConfig rc;
    rc.max_iter = cfg.max_iter;
    rc.tol = cfg.tol;
    const ComparisonReport report = run_comparison(instance, cfg.methods, rc, cfg.seed);
    detail::write_file(dir / "bench.csv", report_csv(report));

    out << report.instance << " (seed " << report.seed.value << ")\n";
    for (const auto& row : report.rows) {
      out << "  " << std::left << std::setw(16) << row.method << std::right << std::setw(8) << row.iterations << "  "
          << std::setw(12) << std::setprecision(4) << row.final_residual << "  " << to_string(row.status);
      if (!row.error.empty()) out << "  (" << row.error << ")";
      out << "\n";
    }
    return exit_code::kOk;
  });
}

/// Runs each method on a linear monotone problem (x* = 0) and checks
/// Gamma-bar monotonicity and the O(1/n) rate bound at every iteration.
inline int cmd_certify(const std::string& config_path, std::ostream& out, std::ostream& err,
                       bool bypass_validation = false) {
  return detail::guarded(err, [&] {
    const ExperimentConfig cfg = load_config(config_path);
    if (cfg.family != ProblemFamily::LinearMonotone) throw ConfigError("certify requires family linear_monotone");
    if (cfg.methods.empty()) throw ConfigError("certify expects at least one method");
    if (!bypass_validation) {
      if (int rc = detail::check_methods(cfg, err); rc != exit_code::kOk) return rc;
    }
    for (const auto& m : cfg.methods) {
      if (m.params.rho != 1.0) {
        err << "method '" << m.name << "': certificates require rho = 1\n";
        return exit_code::kRejected;
      }
    }
    const BenchInstance instance = build_instance(cfg);
    const auto& lin = *std::get<3>(instance);

    RunConfig rc;
    rc.max_iter = cfg.max_iter;
    rc.tol = cfg.tol;
    rc.record_lyapunov = lin.x_star;
    int result = exit_code::kOk;
    out << std::setprecision(6);
    for (const auto& m : cfg.methods) {
      const RunRecord rec = run_method(instance, m, rc);
      const CertificateReport cert = check_certificates(rec, m.params, lin.x0);
      out << m.name << ": iterations " << rec.iterations_used << ", worst lyapunov margin " << cert.lyapunov_margin
          << ", worst rate margin " << cert.rate_margin << "\n";
      if (rec.status == RunStatus::Diverged) {
        out << "  run diverged at n = " << rec.iterations_used << "\n";
        result = exit_code::kCertificate;
      } else if (!cert.ok()) {
        if (cert.lyapunov_violation) out << "  lyapunov violated at n = " << *cert.lyapunov_violation << "\n";
        if (cert.rate_violation) out << "  rate bound violated at n = " << *cert.rate_violation << "\n";
        result = exit_code::kCertificate;
      }
    }
    out << (result == exit_code::kOk ? "certificates hold\n" : "certificate failure\n");
    return result;
  });
}

}  // namespace iprox::cli
