// xtend: command-line front end. Every CSV starts with a versioned preamble
// carrying the hash of the effective configuration; numbers use 17 digits.
#include <CLI11.hpp>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "json.hpp"
#include "xtend/acceptance.hpp"
#include "xtend/canonical.hpp"
#include "xtend/error.hpp"
#include "xtend/extension_field.hpp"
#include "xtend/report.hpp"
#include "xtend/stochastic_lab.hpp"

using nlohmann::json;
using namespace xtend;

namespace {

std::vector<double> parse_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      fail(ErrorKind::InvalidArgument, "not a number list: '" + text + "'");
    }
  }
  if (out.empty()) fail(ErrorKind::InvalidArgument, "empty number list");
  return out;
}

/// "laplacian[:n]", "ou[:n]" or a JSON operator file.
DiffusionOperator1D load_operator(const std::string& spec) {
  const auto colon = spec.find(':');
  const std::string head = spec.substr(0, colon);
  if (head == "laplacian" || head == "ou") {
    json j{{"preset", head}, {"n", 64}};
    if (colon != std::string::npos) j["n"] = static_cast<int>(parse_list(spec.substr(colon + 1)).at(0));
    return operator_from_json(j);
  }
  return operator_from_json(read_json_file(spec));
}

/// Boundary data: an expression in x, or a CSV file whose last column holds
/// one value per grid point ('#' lines and a header row are skipped).
Eigen::VectorXd boundary_data(const DiscreteGenerator& L, const std::string& spec) {
  if (!std::filesystem::is_regular_file(spec)) {
    const Expression fx = Expression::parse(spec);
    return sample(L, [&](double x) { return fx(x); });
  }
  std::ifstream in(spec);
  if (!in) fail(ErrorKind::IoError, "cannot open '" + spec + "'");
  std::vector<double> values;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    const std::string cell = line.substr(line.find_last_of(',') == std::string::npos ? 0 : line.find_last_of(',') + 1);
    char* end = nullptr;
    const double v = std::strtod(cell.c_str(), &end);
    if (end == cell.c_str()) {
      if (values.empty()) continue;  // header
      fail(ErrorKind::ParseError, "'" + spec + "': not a number: " + cell);
    }
    values.push_back(v);
  }
  if (values.size() != static_cast<std::size_t>(L.size()))
    fail(ErrorKind::InvalidArgument, "'" + spec + "' has " + std::to_string(values.size()) + " values, grid has " +
                                         std::to_string(L.size()));
  return Eigen::Map<const Eigen::VectorXd>(values.data(), L.size());
}

const char* backend_name(Backend b) { return b == Backend::TimeChange ? "time_change" : "reflected_sde"; }

PathConfig load_path_config(const std::string& path) {
  PathConfig c;
  if (path.empty()) return c;
  const json j = read_json_file(path);
  if (!j.is_object()) fail(ErrorKind::ParseError, "Monte Carlo config must be a JSON object");
  try {
    c.dt = j.value("dt", c.dt);
    c.horizon = j.value("horizon", c.horizon);
    c.master_seed = j.value("seed", c.master_seed);
    c.n_paths = j.value("n_paths", c.n_paths);
    c.epsilon = j.value("epsilon", c.epsilon);
    c.kappa = j.value("kappa", c.kappa);
    c.dt_max = j.value("dt_max", c.dt_max);
    c.max_steps = j.value("max_steps", c.max_steps);
    const std::string b = j.value("backend", std::string("time_change"));
    if (b == "time_change") c.backend = Backend::TimeChange;
    else if (b == "reflected_sde") c.backend = Backend::ReflectedSDE;
    else fail(ErrorKind::InvalidArgument, "backend must be time_change or reflected_sde");
  } catch (const json::exception& e) {
    fail(ErrorKind::ParseError, path + ": " + e.what());
  }
  return c;
}

json path_config_json(const PathConfig& c) {
  return {{"dt", c.dt},         {"horizon", c.horizon}, {"seed", c.master_seed}, {"n_paths", c.n_paths},
          {"epsilon", c.epsilon}, {"kappa", c.kappa},   {"dt_max", c.dt_max},    {"max_steps", c.max_steps},
          {"backend", backend_name(c.backend)}};
}

std::string num_or_inf(double v) { return std::isinf(v) ? (v > 0 ? "inf" : "-inf") : num(v); }

/// Writes to --out, or stdout when it is empty.
void emit(const std::string& out, const json& config, const std::string& body) {
  const std::string text = csv_preamble(config.dump()) + body;
  if (out.empty()) {
    std::fwrite(text.data(), 1, text.size(), stdout);
    return;
  }
  std::ofstream f(out, std::ios::binary);
  if (!f) fail(ErrorKind::IoError, "cannot write '" + out + "'");
  f << text;
}

std::string estimate_row(const std::string& quantity, double param, const Estimate& e) {
  return quantity + "," + num(param) + "," + num(e.mean) + "," + num(e.se) + "," + std::to_string(e.n) + "," +
         std::to_string(e.n_eff) + "," + num(e.kill_rate) + "," + num(e.censor_rate) + "\n";
}

constexpr const char* kEstimateHeader = "quantity,param,mean,se,n,n_eff,kill_rate,censor_rate\n";

struct Common {
  std::string string = "lebesgue";
  std::string op = "laplacian:64";
  std::string f = "cos(x)";
  std::string out;
  double tol = 1e-8;
};

struct Mc {
  std::string config;
  long long n = -1;
  long long seed = -1;
  double dt = -1;
};

PathConfig resolve(const Mc& m) {
  PathConfig c = load_path_config(m.config);
  if (m.n > 0) c.n_paths = static_cast<std::size_t>(m.n);
  if (m.seed >= 0) c.master_seed = static_cast<std::uint64_t>(m.seed);
  if (m.dt > 0) c.dt = m.dt;
  c.validate();
  return c;
}

void add_mc_options(CLI::App* app, Mc& m) {
  app->add_option("--config", m.config, "Monte Carlo JSON config (dt, horizon, seed, n_paths, epsilon, backend, ...)");
  app->add_option("--n", m.n, "number of paths (overrides the config)");
  app->add_option("--seed", m.seed, "master seed (overrides the config)");
  app->add_option("--dt", m.dt, "base step (overrides the config)");
}

std::shared_ptr<const BernsteinFn> make_psi(const Common& c) {
  PsiOptions o;
  o.tol = c.tol;
  return std::make_shared<const BernsteinFn>(std::make_shared<const KreinString>(load_string(c.string)), o);
}

json base_config(const std::string& task, const Common& c, bool with_op) {
  json j{{"task", task}, {"string", string_to_json(load_string(c.string))}, {"tol", c.tol}};
  if (with_op) {
    j["operator"] = operator_to_json(load_operator(c.op));
    j["f"] = c.f;
  }
  return j;
}

int run_verify(const std::string& suite_name, std::uint64_t seed, const std::string& out) {
  Suite suite = Suite::All;
  if (suite_name == "core") suite = Suite::Core;
  else if (suite_name == "mc") suite = Suite::MonteCarlo;
  else if (suite_name != "all") fail(ErrorKind::InvalidArgument, "suite must be core, mc or all");
  int failed = 0;
  std::string body = "criterion,name,pass,detail\n";
  const auto results = run_acceptance(suite, seed, [&](const CriterionResult& r) {
    std::fprintf(stderr, "%s\n", format_result(r).c_str());
    if (!r.pass) ++failed;
  });
  for (const auto& r : results) {
    std::string detail = r.detail;
    for (char& ch : detail)
      if (ch == ',' || ch == '"') ch = ';';
    body += std::to_string(r.id) + "," + r.name + "," + (r.pass ? "pass" : "fail") + "," + detail + "\n";
  }
  emit(out, json{{"task", "verify"}, {"suite", suite_name}, {"seed", seed}}, body);
  return failed == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Krein-string extensions: symbols, extension fields and path simulation"};
  app.require_subcommand(1);

  Common c;
  Mc mc;
  std::string lambdas = "0.1,1,4,25,100";
  std::string y_grid = "lin:0:2:21";
  double t = 0.25, y = 0.5, x0 = 0.0;
  std::string trace_times = "0.04,0.02,0.01";
  std::string suite = "core";
  long long verify_seed = 20240601;

  auto add_string = [&](CLI::App* s) {
    s->add_option("--string", c.string, "canonical name or JSON string file");
    s->add_option("--tol", c.tol, "relative tolerance for psi");
    s->add_option("--out", c.out, "output CSV (stdout when omitted)");
  };
  auto add_field = [&](CLI::App* s) {
    add_string(s);
    s->add_option("--op", c.op, "laplacian[:n], ou[:n] or JSON operator file");
    s->add_option("--f", c.f, "boundary data: expression in x or CSV file of grid values");
  };

  auto* psi_cmd = app.add_subcommand("psi", "tabulate psi(lambda)");
  add_string(psi_cmd);
  psi_cmd->add_option("--lambda", lambdas, "comma-separated lambdas");

  auto* apply_cmd = app.add_subcommand("apply", "-psi(-L) f on the grid");
  add_field(apply_cmd);

  auto* extend_cmd = app.add_subcommand("extend", "extension field u(x, y)");
  add_field(extend_cmd);
  extend_cmd->add_option("--y", y_grid, "y grid: lin:a:b:n or geo:a:b:n:p");

  auto* dton_cmd = app.add_subcommand("dton", "Dirichlet-to-Neumann map against -psi(-L) f");
  add_field(dton_cmd);

  auto* classify_cmd = app.add_subcommand("classify", "boundary case of a string (JSON on stdout)");
  classify_cmd->add_option("--string", c.string, "canonical name or JSON string file");

  auto* list_cmd = app.add_subcommand("list-canonical", "canonical strings with their case and psi(0)");
  list_cmd->add_option("--out", c.out, "output CSV (stdout when omitted)");

  auto* verify_cmd = app.add_subcommand("verify", "acceptance criteria");
  verify_cmd->add_option("--suite", suite, "core, mc or all");
  verify_cmd->add_option("--seed", verify_seed, "master seed for the Monte Carlo criteria");
  verify_cmd->add_option("--out", c.out, "output CSV (stdout when omitted)");

  auto* sim = app.add_subcommand("simulate", "Monte Carlo experiments");
  sim->require_subcommand(1);
  auto* trace_cmd = sim->add_subcommand("trace", "(E f(Z_t) - f(x0)) / t");
  add_field(trace_cmd);
  add_mc_options(trace_cmd, mc);
  trace_cmd->add_option("--t", trace_times, "comma-separated times");
  trace_cmd->add_option("--x0", x0, "start point of X");

  auto* sub_cmd = sim->add_subcommand("subordinator", "E exp(-lambda T_t)");
  add_string(sub_cmd);
  add_mc_options(sub_cmd, mc);
  sub_cmd->add_option("--t", t, "local-time level");
  sub_cmd->add_option("--lambda", lambdas, "comma-separated lambdas");

  auto* hit_cmd = sim->add_subcommand("hitting", "E exp(-lambda tau0) for Y started at y");
  add_string(hit_cmd);
  add_mc_options(hit_cmd, mc);
  hit_cmd->add_option("--y", y, "start height");
  hit_cmd->add_option("--lambda", lambdas, "comma-separated lambdas");

  auto* harm_cmd = sim->add_subcommand("harmonic", "law of X at the hitting time of the boundary");
  add_field(harm_cmd);
  add_mc_options(harm_cmd, mc);
  harm_cmd->add_option("--y", y, "start height");
  harm_cmd->add_option("--x0", x0, "start point of X");

  auto* dyn_cmd = sim->add_subcommand("dynkin", "Dynkin residual of the extension field");
  add_field(dyn_cmd);
  add_mc_options(dyn_cmd, mc);
  dyn_cmd->add_option("--t", t, "time");
  dyn_cmd->add_option("--x0", x0, "start point of X");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << json{{"error", "InvalidArgument"}, {"message", e.what()}}.dump() << "\n";
    return 2;
  }

  try {
    if (*psi_cmd) {
      const auto psi = make_psi(c);
      json cfg = base_config("psi", c, false);
      cfg["lambda"] = lambdas;
      std::string body = "lambda,psi,lo,hi,mesh_error,levels,nodes\n";
      for (double l : parse_list(lambdas)) {
        const PsiValue v = psi->evaluate(l);
        body += num(l) + "," + num(v.value) + "," + num(v.lo) + "," + num(v.hi) + "," + num(v.mesh_error) + "," +
                std::to_string(v.levels) + "," + std::to_string(v.nodes) + "\n";
      }
      emit(c.out, cfg, body);
    } else if (*apply_cmd || *dton_cmd || *extend_cmd) {
      const auto psi = make_psi(c);
      const auto L = std::make_shared<const DiscreteGenerator>(discretize(load_operator(c.op)));
      const Eigen::VectorXd f = boundary_data(*L, c.f);
      const auto& x = L->grid();
      if (*apply_cmd) {
        const Eigen::VectorXd g = apply_psi_of_minus_L(*psi, *L, f);
        std::string body = "x,f,minus_psi_minus_L_f\n";
        for (int i = 0; i < L->size(); ++i) body += num(x[i]) + "," + num(f(i)) + "," + num(g(i)) + "\n";
        emit(c.out, base_config("apply", c, true), body);
      } else if (*dton_cmd) {
        const ExtensionSolution sol = extend(psi, L, f, {0.0});
        const Eigen::VectorXd d = dirichlet_to_neumann(sol);
        const Eigen::VectorXd ref = apply_psi_of_minus_L(*psi, *L, f);
        std::string body = "x,f,dton,minus_psi_minus_L_f,difference\n";
        for (int i = 0; i < L->size(); ++i)
          body += num(x[i]) + "," + num(f(i)) + "," + num(d(i)) + "," + num(ref(i)) + "," + num(d(i) - ref(i)) + "\n";
        emit(c.out, base_config("dton", c, true), body);
      } else {
        const ExtensionSolution sol = extend(psi, L, f, parse_y_grid(y_grid, psi->string()));
        json cfg = base_config("extend", c, true);
        cfg["y"] = y_grid;
        std::string body = "x,y,u\n";
        for (std::size_t j = 0; j < sol.y_grid().size(); ++j)
          for (int i = 0; i < L->size(); ++i)
            body += num(x[i]) + "," + num(sol.y_grid()[j]) + "," + num(sol.values()(i, static_cast<Eigen::Index>(j))) +
                    "\n";
        emit(c.out, cfg, body);
      }
    } else if (*classify_cmd) {
      const StringClass k = classify(load_string(c.string));
      std::cout << json{{"string", c.string},
                        {"case", std::string(case_name(k.variant))},
                        {"total_mass", num_or_inf(k.total_mass)},
                        {"moment", num_or_inf(k.moment)}}
                       .dump()
                << "\n";
    } else if (*list_cmd) {
      std::string body = "name,case,total_mass,moment,psi0\n";
      for (const auto& name : canonical_names()) {
        const auto s = std::make_shared<const KreinString>(canonical_string(name));
        const StringClass k = classify(*s);
        body += name + "," + std::string(case_name(k.variant)) + "," + num_or_inf(k.total_mass) + "," +
                num_or_inf(k.moment) + "," + num(BernsteinFn(s).psi0()) + "\n";
      }
      emit(c.out, json{{"task", "list-canonical"}, {"names", canonical_names()}}, body);
    } else if (*verify_cmd) {
      return run_verify(suite, static_cast<std::uint64_t>(verify_seed), c.out);
    } else if (*sim) {
      const PathConfig cfg = resolve(mc);
      const KreinString s = load_string(c.string);
      json conf{{"string", string_to_json(s)}, {"mc", path_config_json(cfg)}};
      std::string body = kEstimateHeader;
      if (*trace_cmd) {
        const DiffusionOperator1D op = load_operator(c.op);
        const Expression fx = Expression::parse(c.f);
        conf.update(json{{"task", "simulate.trace"}, {"operator", operator_to_json(op)}, {"f", c.f},
                         {"t", trace_times}, {"x0", x0}});
        std::uint64_t k = 0;
        for (double ti : parse_list(trace_times)) {
          PathConfig per = cfg;
          per.master_seed = cfg.master_seed + 1000 * k++;  // independent draws per time
          body += estimate_row("trace", ti, sample_trace(s, op, [&](double v) { return fx(v); }, x0, ti, per));
        }
      } else if (*sub_cmd) {
        conf.update(json{{"task", "simulate.subordinator"}, {"t", t}, {"lambda", lambdas}});
        for (double l : parse_list(lambdas)) body += estimate_row("laplace", l, estimate_subordinator_laplace(s, t, l, cfg));
      } else if (*hit_cmd) {
        conf.update(json{{"task", "simulate.hitting"}, {"y", y}, {"lambda", lambdas}});
        const auto samples = sample_hitting(s, y, cfg);
        for (double l : parse_list(lambdas)) body += estimate_row("hitting_laplace", l, hitting_laplace(samples, l));
      } else if (*harm_cmd) {
        const DiffusionOperator1D op = load_operator(c.op);
        conf.update(json{{"task", "simulate.harmonic"}, {"operator", operator_to_json(op)}, {"y", y}, {"x0", x0}});
        PsiOptions o;
        o.tol = c.tol;
        const BernsteinFn psi(std::make_shared<const KreinString>(s), o);
        const HarmonicEstimate h = estimate_harmonic_measure(psi, op, x0, y, cfg);
        const std::string n = std::to_string(cfg.n_paths), ne = std::to_string(h.n_eff), cr = num(h.censor_rate);
        body += "alive_mass," + num(y) + "," + num(h.alive_mass) + "," + num(h.alive_se) + "," + n + "," + ne + ",," +
                cr + "\n";
        body += "reference_mass," + num(y) + "," + num(h.reference_mass) + ",," + n + "," + ne + ",," + cr + "\n";
        body += "ks," + num(y) + "," + num(h.ks) + ",," + n + "," + ne + ",," + cr + "\n";
      } else if (*dyn_cmd) {
        const DiffusionOperator1D op = load_operator(c.op);
        conf.update(json{{"task", "simulate.dynkin"}, {"operator", operator_to_json(op)}, {"f", c.f}, {"t", t},
                         {"x0", x0}});
        const auto psi = std::make_shared<const BernsteinFn>(std::make_shared<const KreinString>(s));
        const auto L = std::make_shared<const DiscreteGenerator>(discretize(op));
        const ExtensionSolution sol = extend(psi, L, boundary_data(*L, c.f),
                                             parse_y_grid("lin:0:4:41", s));
        const DynkinResult d = dynkin_residual(s, op, field_context(sol), x0, t, cfg);
        const std::string n = std::to_string(cfg.n_paths), ne = std::to_string(d.n_eff), cr = num(d.censor_rate);
        body += "residual," + num(t) + "," + num(d.residual) + "," + num(d.se) + "," + n + "," + ne + ",," + cr + "\n";
        body += "control," + num(t) + "," + num(d.control) + "," + num(d.control_se) + "," + n + "," + ne + ",," + cr +
                "\n";
        body += "local_time," + num(t) + "," + num(d.mean_local_time) + "," + num(d.local_time_se) + "," + n + "," +
                ne + ",," + cr + "\n";
      }
      emit(c.out, conf, body);
    }
  } catch (const Error& e) {
    std::string message = e.what();
    const std::string prefix = std::string(kind_name(e.kind())) + ": ";
    if (message.rfind(prefix, 0) == 0) message.erase(0, prefix.size());
    std::cerr << json{{"error", std::string(kind_name(e.kind()))}, {"message", message}}.dump() << "\n";
    return 1;
  } catch (const json::exception& e) {
    std::cerr << json{{"error", "ParseError"}, {"message", e.what()}}.dump() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << json{{"error", "InvalidArgument"}, {"message", e.what()}}.dump() << "\n";
    return 1;
  }
  return 0;
}
