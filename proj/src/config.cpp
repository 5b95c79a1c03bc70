#include "fcplan/config.hpp"

#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

namespace fcplan {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double parse_number(const std::string& raw) {
  const std::string s = trim(raw);
  if (s.empty()) throw ConfigError("empty number");
  char* end = nullptr;
  errno = 0;
  const double v = std::strtod(s.c_str(), &end);
  if (errno != 0 || end != s.c_str() + s.size()) throw ConfigError("not a number: '" + s + "'");
  return v;
}

int parse_int(const std::string& raw) {
  const double v = parse_number(raw);
  const int i = static_cast<int>(v);
  if (static_cast<double>(i) != v) throw ConfigError("not an integer: '" + trim(raw) + "'");
  return i;
}

bool parse_bool(const std::string& raw) {
  const std::string s = trim(raw);
  if (s == "true" || s == "1") return true;
  if (s == "false" || s == "0") return false;
  throw ConfigError("not a boolean: '" + s + "'");
}

// shortest %g form that reads back to the same double
std::string fmt(double v) {
  char buf[32];
  for (int prec = 6; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof buf, "%.*g", prec, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  return buf;
}

std::string join(const std::vector<double>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ", ";
    out += fmt(v[i]);
  }
  return out;
}

struct Field {
  std::string key;
  std::function<void(const std::string&)> set;
  std::function<std::string()> get;
};

void add_double(std::vector<Field>& f, std::string key, double& ref) {
  f.push_back({std::move(key), [&ref](const std::string& s) { ref = parse_number(s); },
               [&ref] { return fmt(ref); }});
}

void add_int(std::vector<Field>& f, std::string key, int& ref) {
  f.push_back({std::move(key), [&ref](const std::string& s) { ref = parse_int(s); },
               [&ref] { return std::to_string(ref); }});
}

void add_bool(std::vector<Field>& f, std::string key, bool& ref) {
  f.push_back({std::move(key), [&ref](const std::string& s) { ref = parse_bool(s); },
               [&ref] { return std::string(ref ? "true" : "false"); }});
}

void add_fit(std::vector<Field>& f, const std::string& key, ExpFit& fit) {
  add_double(f, key + ".a", fit.a);
  add_double(f, key + ".b", fit.b);
  add_double(f, key + ".c", fit.c);
}

std::vector<Field> registry(ScenarioConfig& c) {
  std::vector<Field> f;
  auto& fc = c.plant.fc;
  add_double(f, "fc.n_cells", fc.n_cells);
  add_double(f, "fc.v_ca", fc.v_ca);
  add_double(f, "fc.v_sm", fc.v_sm);
  add_double(f, "fc.eta_cm", fc.eta_cm);
  add_double(f, "fc.eta_cp", fc.eta_cp);
  add_double(f, "fc.r_cm", fc.r_cm);
  add_double(f, "fc.j_cp", fc.j_cp);
  add_double(f, "fc.k_t", fc.k_t);
  add_double(f, "fc.k_v", fc.k_v);
  add_double(f, "fc.gamma", fc.gamma);
  add_double(f, "fc.c_p", fc.c_p);
  add_double(f, "fc.c_d", fc.c_d);
  add_double(f, "fc.a_t", fc.a_t);
  add_double(f, "fc.k_ca_in", fc.k_ca_in);
  add_double(f, "fc.y_o2_atm", fc.y_o2_atm);
  add_double(f, "fc.t_st", fc.t_st);
  add_double(f, "fc.t_atm", fc.t_atm);
  add_double(f, "fc.phi_atm", fc.phi_atm);
  add_double(f, "fc.p_atm", fc.p_atm);
  add_double(f, "fc.nozzle_gas_constant", fc.nozzle_gas_constant);
  add_double(f, "fc.nozzle_smoothing", fc.nozzle_smoothing);
  add_double(f, "fc.omega_regularization", fc.omega_regularization);

  auto& cm = c.plant.compressor;
  add_double(f, "compressor.k_speed", cm.k_speed);
  add_double(f, "compressor.k_head", cm.k_head);
  add_double(f, "compressor.smoothing", cm.smoothing);

  auto& pol = c.plant.polarization;
  add_double(f, "polarization.cell_area_cm2", pol.cell_area_cm2);
  add_double(f, "polarization.e0", pol.e0);
  add_double(f, "polarization.p_ref", pol.p_ref);
  add_double(f, "polarization.p_floor", pol.p_floor);
  add_double(f, "polarization.v_act", pol.v_act);
  add_double(f, "polarization.i_act", pol.i_act);
  add_double(f, "polarization.r_ohm", pol.r_ohm);
  add_double(f, "polarization.m_conc", pol.m_conc);
  add_double(f, "polarization.i_conc", pol.i_conc);

  auto& b = c.plant.battery;
  add_double(f, "battery.n_series", b.n_series);
  add_double(f, "battery.n_parallel", b.n_parallel);
  add_double(f, "battery.capacity_ah", b.capacity_ah);
  add_double(f, "battery.r_sd", b.r_sd);
  add_double(f, "battery.ocv_a", b.ocv_a);
  add_double(f, "battery.ocv_b", b.ocv_b);
  add_double(f, "battery.ocv_c", b.ocv_c);
  add_double(f, "battery.ocv_d", b.ocv_d);
  add_double(f, "battery.ocv_e", b.ocv_e);
  add_double(f, "battery.ocv_f", b.ocv_f);
  add_fit(f, "battery.r_series", b.r_series);
  add_fit(f, "battery.r_s", b.r_s);
  add_fit(f, "battery.c_s", b.c_s);
  add_fit(f, "battery.r_f", b.r_f);
  add_fit(f, "battery.c_f", b.c_f);

  for (int i = 0; i < 16; ++i) {
    auto& o = c.plant.coeff_overrides[static_cast<std::size_t>(i)];
    f.push_back({"coeff.c" + std::to_string(i + 1),
                 [&o](const std::string& s) {
                   if (trim(s) == "none") o.reset();
                   else o = parse_number(s);
                 },
                 [&o] { return o ? fmt(*o) : std::string("none"); }});
  }

  auto& d = c.demand;
  f.push_back({"demand.breakpoints",
               [&d](const std::string& s) {
                 d.breakpoints.clear();
                 std::stringstream ss(s);
                 std::string item;
                 while (std::getline(ss, item, ',')) {
                   const auto colon = item.find(':');
                   if (colon == std::string::npos) throw ConfigError("breakpoint needs time:level, got '" + trim(item) + "'");
                   d.breakpoints.emplace_back(parse_number(item.substr(0, colon)),
                                              parse_number(item.substr(colon + 1)));
                 }
                 if (d.breakpoints.empty()) throw ConfigError("demand.breakpoints is empty");
               },
               [&d] {
                 std::string out;
                 for (std::size_t i = 0; i < d.breakpoints.size(); ++i) {
                   if (i) out += ", ";
                   out += fmt(d.breakpoints[i].first) + ":" + fmt(d.breakpoints[i].second);
                 }
                 return out;
               }});
  add_double(f, "demand.preview", d.preview);
  add_double(f, "demand.preview_offset", d.preview_offset);

  add_double(f, "scenario.duration", c.duration);
  add_double(f, "scenario.dt", c.dt);
  add_int(f, "scenario.horizon", c.horizon);
  add_int(f, "scenario.model_substeps", c.model_substeps);
  add_int(f, "scenario.plant_substeps", c.plant_substeps);
  add_bool(f, "scenario.record_wall_time", c.record_wall_time);
  add_double(f, "initial.v_soc", c.initial.v_soc);
  add_double(f, "initial.lambda_target", c.initial.lambda_target);

  add_double(f, "weights.w_ref", c.weights.w_ref);
  add_double(f, "weights.w_e", c.weights.w_e);
  f.push_back({"weights.w_s",
               [&c](const std::string& s) {
                 const auto v = parse_number_list(s);
                 if (v.size() != 3) throw ConfigError("weights.w_s takes the three diagonal entries");
                 c.weights.w_s = Eigen::Vector3d(v[0], v[1], v[2]).asDiagonal();
               },
               [&c] {
                 return join({c.weights.w_s(0, 0), c.weights.w_s(1, 1), c.weights.w_s(2, 2)});
               }});
  add_double(f, "weights.cost_scale", c.cost_scale);
  f.push_back({"weights.increment",
               [&c](const std::string& s) {
                 const std::string v = trim(s);
                 if (v == "nominal") c.increment = IncrementReference::Nominal;
                 else if (v == "previous_input") c.increment = IncrementReference::PreviousInput;
                 else throw ConfigError("weights.increment is nominal or previous_input, got '" + v + "'");
               },
               [&c] {
                 return std::string(c.increment == IncrementReference::Nominal ? "nominal" : "previous_input");
               }});

  auto& cs = c.constraints;
  add_double(f, "constraints.lambda_min", cs.lambda_min);
  add_double(f, "constraints.choke_a", cs.choke_a);
  add_double(f, "constraints.choke_b", cs.choke_b);
  add_double(f, "constraints.surge_a", cs.surge_a);
  add_double(f, "constraints.surge_b", cs.surge_b);
  add_double(f, "constraints.v_cm_min", cs.v_cm_min);
  add_double(f, "constraints.v_cm_max", cs.v_cm_max);
  add_double(f, "constraints.i_st_min", cs.i_st_min);
  add_double(f, "constraints.i_st_max", cs.i_st_max);
  add_double(f, "constraints.i_bat_cmax", cs.i_bat_cmax);
  add_double(f, "constraints.i_bat_dmax", cs.i_bat_dmax);
  add_double(f, "constraints.q_max", cs.q_max);
  add_double(f, "constraints.clamp_margin", cs.clamp_margin);

  auto& so = c.solver;
  add_int(f, "solver.max_outer_iterations", so.max_outer_iterations);
  add_int(f, "solver.max_inner_iterations", so.max_inner_iterations);
  add_double(f, "solver.reg_initial", so.reg_initial);
  add_double(f, "solver.reg_min", so.reg_min);
  add_double(f, "solver.reg_max", so.reg_max);
  add_double(f, "solver.reg_increase", so.reg_increase);
  add_double(f, "solver.reg_decrease", so.reg_decrease);
  add_int(f, "solver.line_search_steps", so.line_search_steps);
  add_double(f, "solver.armijo", so.armijo);
  add_double(f, "solver.penalty_initial", so.penalty_initial);
  add_double(f, "solver.penalty_growth", so.penalty_growth);
  add_double(f, "solver.violation_decrease", so.violation_decrease);
  add_double(f, "solver.penalty_max", so.penalty_max);
  add_double(f, "solver.multiplier_max", so.multiplier_max);
  add_double(f, "solver.tol_cost", so.tol_cost);
  add_double(f, "solver.tol_grad", so.tol_grad);
  add_double(f, "solver.tol_viol", so.tol_viol);

  f.push_back({"sweep.budgets",
               [&c](const std::string& s) {
                 if (trim(s).empty()) { c.budgets.clear(); return; }
                 c.budgets = parse_number_list(s);
               },
               [&c] { return join(c.budgets); }});
  return f;
}

}  // namespace

std::vector<double> parse_number_list(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_number(item));
  if (out.empty()) throw ConfigError("empty list");
  return out;
}

ScenarioConfig parse_config(const std::string& text, const std::string& origin) {
  ScenarioConfig cfg;
  std::vector<Field> fields = registry(cfg);
  std::map<std::string, Field*> by_key;
  for (auto& f : fields) by_key[f.key] = &f;

  std::set<std::string> seen;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::string where = origin + ":" + std::to_string(lineno) + ": ";
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(where + "expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const auto it = by_key.find(key);
    if (it == by_key.end()) throw ConfigError(where + "unknown key '" + key + "'");
    if (!seen.insert(key).second) throw ConfigError(where + "repeated key '" + key + "'");
    try {
      it->second->set(line.substr(eq + 1));
    } catch (const ConfigError& e) {
      throw ConfigError(where + key + ": " + e.what());
    }
  }
  try {
    cfg.validate();
    derive_coefficients(cfg.plant);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(origin + ": " + e.what());
  }
  return cfg;
}

ScenarioConfig load_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open config file '" + path + "'");
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_config(ss.str(), path);
}

std::string config_text(const ScenarioConfig& cfg) {
  ScenarioConfig copy = cfg;
  std::string out;
  std::string section;
  for (const auto& f : registry(copy)) {
    const std::string head = f.key.substr(0, f.key.find('.'));
    if (head != section) {
      if (!section.empty()) out += "\n";
      section = head;
    }
    out += f.key + " = " + f.get() + "\n";
  }
  return out;
}

std::vector<std::string> config_keys() {
  ScenarioConfig cfg;
  std::vector<std::string> keys;
  for (const auto& f : registry(cfg)) keys.push_back(f.key);
  return keys;
}

}  // namespace fcplan
