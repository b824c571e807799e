#include "nspnp/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "nspnp/errors.hpp"

namespace nspnp {

namespace {

namespace pt = boost::property_tree;

const std::map<std::string, std::set<std::string>>& schema() {
  static const std::map<std::string, std::set<std::string>> s{
      {"grid", {"dims", "n", "nx", "ny", "nz", "length", "lx", "ly", "lz", "boundary"}},
      {"time", {"t_end", "dt"}},
      {"mollifier", {"enabled", "blocks", "length_scale"}},
      {"initial",
       {"velocity", "velocity_amplitude", "charges", "background", "charge_amplitude", "blob_width",
        "blob_separation", "modes"}},
      {"output", {"every"}},
      {"solver", {"tol", "max_iter", "method", "compat_tol", "force_form", "advection", "max_cfl"}},
      {"picard",
       {"steps", "dt", "tol", "max_iters", "t_shrink", "threshold_t_max", "threshold_target", "bisections",
        "perturbation", "frozen_drift"}},
      {"regularity", {"radii", "stride_space", "stride_time", "epsilon0", "epsilon1", "theta0", "lemma_constant"}},
      {"run", {"seed"}},
  };
  return s;
}

/// Typed access to one section with key-qualified errors.
class Section {
 public:
  Section(std::string name, const pt::ptree* tree) : name_(std::move(name)), tree_(tree) {}

  template <typename T>
  void read(const std::string& key, T& target) const {
    if (!tree_) return;
    const auto value = tree_->get_optional<std::string>(key);
    if (!value) return;
    std::istringstream in(*value);
    T parsed{};
    in >> parsed;
    if (in.fail() || !(in >> std::ws).eof()) fail(key, *value);
    target = parsed;
  }

  void read_bool(const std::string& key, bool& target) const {
    if (auto v = raw(key)) {
      if (*v == "true" || *v == "yes" || *v == "1") target = true;
      else if (*v == "false" || *v == "no" || *v == "0") target = false;
      else fail(key, *v);
    }
  }

  template <typename E>
  void read_enum(const std::string& key, E& target, const std::map<std::string, E>& names) const {
    if (auto v = raw(key)) {
      const auto it = names.find(*v);
      if (it == names.end()) fail(key, *v);
      target = it->second;
    }
  }

  void read_list(const std::string& key, std::vector<double>& target) const {
    if (auto v = raw(key)) {
      std::vector<double> out;
      std::istringstream in(*v);
      std::string item;
      while (std::getline(in, item, ',')) {
        std::istringstream one(item);
        double x = 0.0;
        one >> x;
        if (one.fail() || !(one >> std::ws).eof()) fail(key, *v);
        out.push_back(x);
      }
      if (out.empty()) fail(key, *v);
      target = std::move(out);
    }
  }

  std::optional<std::string> raw(const std::string& key) const {
    if (!tree_) return std::nullopt;
    if (auto v = tree_->get_optional<std::string>(key)) return *v;
    return std::nullopt;
  }

 private:
  [[noreturn]] void fail(const std::string& key, const std::string& value) const {
    throw ConfigError(name_ + "." + key + ": cannot parse '" + value + "'");
  }

  std::string name_;
  const pt::ptree* tree_;
};

void check_schema(const pt::ptree& tree) {
  for (const auto& [section, body] : tree) {
    const auto it = schema().find(section);
    if (it == schema().end()) throw ConfigError("unknown section [" + section + "]");
    if (!body.data().empty()) throw ConfigError("key '" + section + "' must live inside a section");
    for (const auto& [key, value] : body) {
      if (!it->second.contains(key)) throw ConfigError("unknown key " + section + "." + key);
      if (!value.empty()) throw ConfigError("nested key under " + section + "." + key);
    }
  }
}

Section section(const pt::ptree& tree, const std::string& name) {
  const auto child = tree.get_child_optional(name);
  return Section(name, child ? &*child : nullptr);
}

GridSpec read_grid(const Section& s) {
  GridSpec g;
  int dims = 2;
  s.read("dims", dims);
  if (dims != 2 && dims != 3) throw ConfigError("grid.dims must be 2 or 3");
  int n = 32;
  double length = 1.0;
  s.read("n", n);
  s.read("length", length);
  g.dims = dims;
  g.cells = {n, n, dims == 3 ? n : 1};
  g.lengths = {length, length, dims == 3 ? length : 1.0};
  s.read("nx", g.cells[0]);
  s.read("ny", g.cells[1]);
  s.read("lx", g.lengths[0]);
  s.read("ly", g.lengths[1]);
  if (dims == 3) {
    s.read("nz", g.cells[2]);
    s.read("lz", g.lengths[2]);
  } else if (s.raw("nz") || s.raw("lz")) {
    throw ConfigError("grid.nz and grid.lz need grid.dims = 3");
  }
  g.bc = Boundary::wall;
  s.read_enum<Boundary>("boundary", g.bc, {{"wall", Boundary::wall}, {"periodic", Boundary::periodic}});
  return g;
}

template <typename F>
void rethrow_as_config(const std::string& where, F&& f) {
  try {
    f();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(where + ": " + e.what());
  }
}

}  // namespace

void PicardSettings::validate() const {
  if (steps < 1) throw ConfigError("picard.steps must be at least 1");
  if (!(dt > 0.0) || !std::isfinite(dt)) throw ConfigError("picard.dt must be positive");
  rethrow_as_config("picard", [&] { solver.validate(); });
  if (!(threshold_t_max > 0.0)) throw ConfigError("picard.threshold_t_max must be positive");
  if (!(threshold_target > 0.0 && threshold_target < 1.0))
    throw ConfigError("picard.threshold_target must lie in (0, 1)");
  if (bisections < 1) throw ConfigError("picard.bisections must be at least 1");
  if (!(perturbation > 0.0) || !std::isfinite(perturbation)) throw ConfigError("picard.perturbation must be positive");
}

void AppConfig::validate() const {
  sim.validate();
  picard.validate();
  rethrow_as_config("regularity", [&] { analysis.regularity.validate(); });
  if (!(analysis.lemma_constant > 0.0)) throw ConfigError("regularity.lemma_constant must be positive");
}

AppConfig parse_config(std::istream& in) {
  pt::ptree tree;
  try {
    pt::ini_parser::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(std::string("malformed config: ") + e.what());
  }
  check_schema(tree);

  AppConfig c;
  SimConfig& sim = c.sim;
  sim.grid = read_grid(section(tree, "grid"));

  const auto time = section(tree, "time");
  time.read("t_end", sim.t_end);
  time.read("dt", sim.dt);

  const auto moll = section(tree, "mollifier");
  moll.read_bool("enabled", sim.mollified);
  moll.read("blocks", sim.blocks);
  moll.read("length_scale", sim.length_scale);

  const auto init = section(tree, "initial");
  InitialCondition& ic = sim.initial;
  init.read_enum<VelocityPreset>("velocity", ic.velocity,
                                 {{"zero", VelocityPreset::zero},
                                  {"taylor_green", VelocityPreset::taylor_green},
                                  {"cell_flow", VelocityPreset::cell_flow},
                                  {"random", VelocityPreset::random}});
  init.read_enum<ChargePreset>("charges", ic.charges,
                               {{"none", ChargePreset::none},
                                {"uniform", ChargePreset::uniform},
                                {"blob", ChargePreset::blob},
                                {"sinusoidal", ChargePreset::sinusoidal},
                                {"random", ChargePreset::random}});
  init.read("velocity_amplitude", ic.velocity_amplitude);
  init.read("background", ic.background);
  init.read("charge_amplitude", ic.charge_amplitude);
  init.read("blob_width", ic.blob_width);
  init.read("blob_separation", ic.blob_separation);
  init.read("modes", ic.modes);

  section(tree, "output").read("every", sim.output_every);

  const auto solver = section(tree, "solver");
  solver.read("tol", sim.elliptic.tol);
  solver.read("max_iter", sim.elliptic.max_iter);
  solver.read("compat_tol", sim.elliptic.compat_tol);
  solver.read_enum<EllipticMethod>("method", sim.elliptic.method,
                                   {{"cg", EllipticMethod::conjugate_gradient},
                                    {"direct", EllipticMethod::direct_small}});
  solver.read_enum<ForceForm>("force_form", sim.force_form,
                              {{"maxwell_stress", ForceForm::maxwell_stress},
                               {"charge_gradient", ForceForm::charge_gradient}});
  solver.read_enum<Advection>("advection", sim.advection,
                              {{"centered", Advection::centered}, {"upwind", Advection::upwind}});
  solver.read("max_cfl", sim.max_cfl);

  const auto picard = section(tree, "picard");
  PicardSettings& p = c.picard;
  picard.read("steps", p.steps);
  picard.read("dt", p.dt);
  picard.read("tol", p.solver.tol);
  picard.read("max_iters", p.solver.max_iters);
  picard.read("t_shrink", p.solver.t_shrink);
  picard.read("threshold_t_max", p.threshold_t_max);
  picard.read("threshold_target", p.threshold_target);
  picard.read("bisections", p.bisections);
  picard.read("perturbation", p.perturbation);
  picard.read_bool("frozen_drift", p.frozen_drift);

  const auto reg = section(tree, "regularity");
  RegularityConfig& r = c.analysis.regularity;
  reg.read_list("radii", r.radii);
  reg.read("stride_space", r.stride_space);
  reg.read("stride_time", r.stride_time);
  reg.read("epsilon0", r.epsilon0);
  reg.read("epsilon1", r.epsilon1);
  reg.read("theta0", r.theta0);
  reg.read("lemma_constant", c.analysis.lemma_constant);

  const auto run = section(tree, "run");
  if (auto seed = run.raw("seed")) {
    if (seed->empty() || seed->find_first_not_of("0123456789") != std::string::npos)
      throw ConfigError("run.seed: cannot parse '" + *seed + "'");
    try {
      sim.seed = std::stoull(*seed);
    } catch (const std::out_of_range&) {
      throw ConfigError("run.seed: out of range");
    }
  }

  c.validate();
  return c;
}

AppConfig parse_config_text(const std::string& text) {
  std::istringstream in(text);
  return parse_config(in);
}

AppConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  return parse_config(in);
}

}  // namespace nspnp
