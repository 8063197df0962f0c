// Command-line front end: synthetic field generation, field-file IO, energy
// and curvature, orbit metrics, gauge fixing, offset selection, face
// classification, and the multiscale approximation pipeline.
//
// Every command prints one JSON document to stdout carrying
//   {"schema": "weakconn/1", "command": ..., "config": {resolved values}}
// plus its results, so a run can be replayed from its own output. Exit codes:
// 0 success, 2 validation error (message names the offending input), 3 when
// --strict is set and an optimizer or selection reports failure.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "weakconn/approx.hpp"
#include "weakconn/faces.hpp"
#include "weakconn/fieldio.hpp"
#include "weakconn/forms.hpp"
#include "weakconn/gauge.hpp"
#include "weakconn/grid.hpp"
#include "weakconn/holonomy.hpp"
#include "weakconn/metrics.hpp"
#include "weakconn/su2.hpp"

namespace wc = weakconn;
using json = nlohmann::ordered_json;

namespace {

// Per-subcommand option registry. A JSON config document (--config) fills any
// registered option not given on the command line; unknown keys are rejected.
// resolved() echoes the effective value of every option so each report embeds
// the full run configuration.
class Params {
 public:
  explicit Params(CLI::App* sub) : sub_(sub) {
    sub->add_option("--config", config_path_,
                    "JSON object whose keys are the option names below");
  }

  template <class T>
  CLI::Option* add(const std::string& name, T& target, const std::string& help) {
    CLI::Option* opt = sub_->add_option("--" + name, target, help);
    slots_.push_back(Slot{name, opt, &target, false});
    return opt;
  }
  CLI::Option* add_flag(const std::string& name, bool& target, const std::string& help) {
    CLI::Option* opt = sub_->add_flag("--" + name, target, help);
    slots_.push_back(Slot{name, opt, &target, false});
    return opt;
  }
  void require(const std::string& name) { required_.push_back(name); }

  // Applies the config document (command line wins), then checks required
  // options are set by either source.
  void resolve() {
    if (!config_path_.empty()) apply_config();
    for (const std::string& name : required_)
      if (!set(name)) throw std::runtime_error("missing required option --" + name);
  }

  bool set(const std::string& name) const {
    const Slot* s = find(name);
    return s != nullptr && (s->opt->count() > 0 || s->from_config);
  }

  json resolved() const {
    json out = json::object();
    for (const Slot& s : slots_)
      std::visit([&](auto* p) { out[s.name] = *p; }, s.target);
    return out;
  }

 private:
  using Target = std::variant<bool*, int*, double*, std::string*, std::uint64_t*>;
  struct Slot {
    std::string name;
    CLI::Option* opt;
    Target target;
    bool from_config;
  };

  const Slot* find(const std::string& name) const {
    for (const Slot& s : slots_)
      if (s.name == name) return &s;
    return nullptr;
  }
  Slot* find(const std::string& name) {
    return const_cast<Slot*>(static_cast<const Params*>(this)->find(name));
  }

  void apply_config() {
    std::ifstream in(config_path_);
    if (!in) throw std::runtime_error("cannot open config " + config_path_);
    json doc;
    try {
      doc = json::parse(in);
    } catch (const json::exception& e) {
      throw std::runtime_error("config " + config_path_ + ": " + e.what());
    }
    if (!doc.is_object())
      throw std::runtime_error("config " + config_path_ + ": expected a JSON object");
    for (const auto& [key, value] : doc.items()) {
      Slot* slot = find(key);
      if (slot == nullptr)
        throw std::runtime_error("config " + config_path_ + ": unknown key \"" + key + "\"");
      if (slot->opt->count() > 0) continue;
      try {
        std::visit(
            [&](auto* p) { *p = value.template get<std::remove_pointer_t<decltype(p)>>(); },
            slot->target);
      } catch (const json::exception&) {
        throw std::runtime_error("config " + config_path_ + ": bad value for key \"" + key +
                                 "\"");
      }
      slot->from_config = true;
    }
  }

  CLI::App* sub_;
  std::string config_path_;
  std::vector<Slot> slots_;
  std::vector<std::string> required_;
};

void emit(const json& doc) { std::cout << doc.dump(2) << "\n"; }

json report_header(const std::string& command, const Params& params) {
  json out;
  out["schema"] = "weakconn/1";
  out["command"] = command;
  out["config"] = params.resolved();
  return out;
}

json face_json(const wc::FaceId& f) {
  return json{{"axes", f.axes}, {"corner", f.corner}, {"edge", f.edge_hu}};
}

json group_json(const wc::Group& g) {
  return json{{"w", g.w}, {"x", g.x}, {"y", g.y}, {"z", g.z}};
}

wc::LatticeForm load_degree(const std::string& path, int degree, const char* what) {
  wc::FieldData f = wc::read_field(path);
  if (f.form.degree != degree)
    throw std::runtime_error(path + ": expected a degree-" + std::to_string(degree) +
                             " field (" + what + "), got degree " +
                             std::to_string(f.form.degree));
  return std::move(f.form);
}

std::vector<int> parse_ints(const std::string& csv, const std::string& what) {
  std::vector<int> out;
  std::stringstream ss(csv);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    try {
      std::size_t pos = 0;
      out.push_back(std::stoi(tok, &pos));
      if (pos != tok.size()) throw std::invalid_argument(tok);
    } catch (const std::exception&) {
      throw std::runtime_error(what + ": bad integer \"" + tok + "\"");
    }
  }
  if (out.empty()) throw std::runtime_error(what + ": empty list");
  return out;
}

std::vector<wc::ScheduleEntry> parse_schedule(const std::string& text) {
  std::vector<wc::ScheduleEntry> out;
  std::stringstream ss(text);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    const std::size_t colon = tok.find(':');
    if (colon == std::string::npos)
      throw std::runtime_error("schedule: expected r:delta, got \"" + tok + "\"");
    try {
      std::size_t pr = 0, pd = 0;
      const std::string rs = tok.substr(0, colon), ds = tok.substr(colon + 1);
      wc::ScheduleEntry e{std::stod(rs, &pr), std::stod(ds, &pd)};
      if (pr != rs.size() || pd != ds.size()) throw std::invalid_argument(tok);
      out.push_back(e);
    } catch (const std::exception&) {
      throw std::runtime_error("schedule: bad number in \"" + tok + "\"");
    }
  }
  if (out.empty()) throw std::runtime_error("schedule: empty");
  return out;
}

json entry_json(const wc::ExtensionResult& res, bool with_faces) {
  json e;
  e["r"] = res.r;
  e["delta"] = res.delta;
  e["ok"] = res.ok;
  if (!res.ok) {
    e["message"] = res.message;
    return e;
  }
  e["tau"] = res.tau;
  e["err_A_L2"] = res.err_A;
  e["err_F_L2"] = res.err_F;
  e["err_A_raw"] = res.err_A_raw;
  e["err_F_raw"] = res.err_F_raw;
  e["trace_residual"] = res.trace_residual;
  e["n_cubes"] = res.n_cubes;
  e["n_bad"] = res.n_bad;
  e["skipped"] = res.skipped;
  e["bad_volume"] = res.bad_volume;
  e["singular_faces"] = res.singular.size();
  if (with_faces) {
    json faces = json::array();
    for (const wc::FaceId& f : res.singular) faces.push_back(face_json(f));
    e["singular"] = std::move(faces);
  }
  e["timings"] = json{{"seconds", res.seconds}};
  return e;
}

// ---------------------------------------------------------------------------
// generate

struct GenerateArgs {
  std::string kind, group = "su2", out, gauge_out;
  int n = 5, sites = 8;
  double param = 1.0;
  std::uint64_t seed = 0;
  std::shared_ptr<Params> params;
};

void add_generate(CLI::App& app) {
  auto* sub = app.add_subcommand("generate", "write a synthetic field file");
  auto a = std::make_shared<GenerateArgs>();
  a->params = std::make_shared<Params>(sub);
  Params& p = *a->params;
  p.add("kind", a->kind,
        "zero | constant | abelian-affine | pure-gauge | smooth-random | line-singular");
  p.add("n", a->n, "dimension");
  p.add("sites", a->sites, "sites per axis");
  p.add("param", a->param, "generator amplitude");
  p.add("seed", a->seed, "rng seed");
  p.add("group", a->group, "su2 | u1");
  p.add("out", a->out, "field file to write");
  p.add("gauge-out", a->gauge_out, "gauge file to write (pure-gauge only)");
  p.require("kind");
  p.require("out");
  sub->callback([a] {
    a->params->resolve();
    if (a->group != "su2" && a->group != "u1")
      throw std::runtime_error("--group: expected su2 or u1, got \"" + a->group + "\"");
    const wc::Grid g(a->n, a->sites);
    wc::Generated made = wc::generate_field(a->kind, g, a->param, a->seed);
    made.field.group = a->group;
    wc::write_field(a->out, made.field);
    json out = report_header("generate", *a->params);
    out["sites"] = g.sites();
    out["components"] = made.field.form.comps();
    out["out"] = a->out;
    if (!a->gauge_out.empty()) {
      if (!made.gauge)
        throw std::runtime_error("--gauge-out: only pure-gauge emits a gauge");
      wc::write_gauge(a->gauge_out, *made.gauge);
      out["gauge_out"] = a->gauge_out;
    }
    emit(out);
  });
}

// ---------------------------------------------------------------------------
// energy / curvature / check-bianchi

struct FieldInArgs {
  std::string in, out;
  std::shared_ptr<Params> params;
};

void add_energy(CLI::App& app) {
  auto* sub = app.add_subcommand("energy", "Yang-Mills energy of a field file");
  auto a = std::make_shared<FieldInArgs>();
  a->params = std::make_shared<Params>(sub);
  a->params->add("in", a->in, "field file (degree 1 connection or degree 2 curvature)");
  a->params->require("in");
  sub->callback([a] {
    a->params->resolve();
    const wc::FieldData f = wc::read_field(a->in);
    double energy = 0.0;
    if (f.form.degree == 1)
      energy = wc::ym_energy(wc::curvature(f.form));
    else if (f.form.degree == 2)
      energy = wc::ym_energy(f.form);
    else
      throw std::runtime_error(a->in + ": energy needs degree 1 or 2, got degree " +
                               std::to_string(f.form.degree));
    json out = report_header("energy", *a->params);
    out["degree"] = f.form.degree;
    out["ym_energy"] = energy;
    emit(out);
  });
}

void add_curvature(CLI::App& app) {
  auto* sub = app.add_subcommand("curvature", "curvature of a degree-1 field file");
  auto a = std::make_shared<FieldInArgs>();
  a->params = std::make_shared<Params>(sub);
  a->params->add("in", a->in, "degree-1 field file");
  a->params->add("out", a->out, "degree-2 field file to write");
  a->params->require("in");
  a->params->require("out");
  sub->callback([a] {
    a->params->resolve();
    const wc::FieldData f = wc::read_field(a->in);
    if (f.form.degree != 1)
      throw std::runtime_error(a->in + ": curvature needs a degree-1 field, got degree " +
                               std::to_string(f.form.degree));
    wc::FieldData out_field{wc::curvature(f.form), f.group};
    wc::write_field(a->out, out_field);
    json out = report_header("curvature", *a->params);
    out["ym_energy"] = wc::ym_energy(out_field.form);
    out["components"] = out_field.form.comps();
    out["out"] = a->out;
    emit(out);
  });
}

void add_check_bianchi(CLI::App& app) {
  auto* sub = app.add_subcommand("check-bianchi",
                                 "covariant-derivative residual of the curvature");
  auto a = std::make_shared<FieldInArgs>();
  a->params = std::make_shared<Params>(sub);
  a->params->add("in", a->in, "degree-1 field file");
  a->params->require("in");
  sub->callback([a] {
    a->params->resolve();
    const wc::LatticeForm A = load_degree(a->in, 1, "connection");
    json out = report_header("check-bianchi", *a->params);
    out["residual"] = wc::bianchi_residual(A);
    out["h"] = A.grid.h;
    emit(out);
  });
}

// ---------------------------------------------------------------------------
// distance

struct DistanceArgs {
  std::string metric, a_path, b_path, cert_out;
  int max_iters = 200, starts = 4;
  double tol = 1e-5;
  std::uint64_t seed = 12345;
  std::shared_ptr<Params> params;
};

void add_distance(CLI::App& app, const bool& strict, int& rc) {
  auto* sub = app.add_subcommand("distance", "orbit distance between two field files");
  auto a = std::make_shared<DistanceArgs>();
  a->params = std::make_shared<Params>(sub);
  Params& p = *a->params;
  p.add("metric", a->metric, "d-conn | delta-conn | d-curv | delta-curv");
  p.add("a", a->a_path, "first field file");
  p.add("b", a->b_path, "second field file");
  p.add("max-iters", a->max_iters, "gauge-descent iterations per start (conn metrics)");
  p.add("tol", a->tol, "gradient norm tolerance (conn metrics)");
  p.add("starts", a->starts, "descent starts (conn metrics)");
  p.add("seed", a->seed, "rng seed for random starts");
  p.add("cert-out", a->cert_out, "gauge file for the minimizing certificate");
  p.require("metric");
  p.require("a");
  p.require("b");
  sub->callback([a, &strict, &rc] {
    a->params->resolve();
    wc::DistanceReport rep;
    if (a->metric == "d-curv" || a->metric == "delta-curv") {
      const wc::LatticeForm F = load_degree(a->a_path, 2, "curvature");
      const wc::LatticeForm Fp = load_degree(a->b_path, 2, "curvature");
      rep = a->metric == "d-curv" ? wc::d_curv(F, Fp) : wc::delta_curv(F, Fp);
    } else if (a->metric == "d-conn" || a->metric == "delta-conn") {
      const wc::LatticeForm A = load_degree(a->a_path, 1, "connection");
      const wc::LatticeForm Ap = load_degree(a->b_path, 1, "connection");
      wc::ConnOpts opts;
      opts.max_iters = a->max_iters;
      opts.tol = a->tol;
      opts.starts = a->starts;
      opts.seed = a->seed;
      rep = a->metric == "d-conn" ? wc::d_conn(A, Ap, opts) : wc::delta_conn(A, Ap, opts);
    } else {
      throw std::runtime_error("--metric: expected d-conn|delta-conn|d-curv|delta-curv, got \"" +
                               a->metric + "\"");
    }
    json out = report_header("distance", *a->params);
    out["value"] = rep.value;
    out["converged"] = rep.converged;
    out["method"] = rep.method;
    if (!rep.slice_table.empty()) {
      json table = json::array();
      for (const auto& [axes, value] : rep.slice_table)
        table.push_back(json{{"axes", axes}, {"value", value}});
      out["slice_table"] = std::move(table);
    }
    if (!a->cert_out.empty()) {
      wc::write_gauge(a->cert_out, rep.certificate);
      out["cert_out"] = a->cert_out;
    }
    emit(out);
    if (strict && !rep.converged) rc = 3;
  });
}

// ---------------------------------------------------------------------------
// gauge-fix

struct GaugeFixArgs {
  std::string in, mode = "coulomb", out, gauge_out;
  int axis = 0, max_iters = 500, restarts = 3;
  double tol = 1e-6;
  std::uint64_t seed = 12345;
  bool pin_boundary = false;
  std::shared_ptr<Params> params;
};

void add_gauge_fix(CLI::App& app, const bool& strict, int& rc) {
  auto* sub = app.add_subcommand("gauge-fix", "move a connection to a reference gauge");
  auto a = std::make_shared<GaugeFixArgs>();
  a->params = std::make_shared<Params>(sub);
  Params& p = *a->params;
  p.add("in", a->in, "degree-1 field file");
  p.add("mode", a->mode, "coulomb | axial");
  p.add("axis", a->axis, "killed component (axial)");
  p.add("max-iters", a->max_iters, "descent iterations (coulomb)");
  p.add("tol", a->tol, "residual tolerance (coulomb)");
  p.add("restarts", a->restarts, "random restarts (coulomb)");
  p.add("seed", a->seed, "rng seed for restarts");
  p.add_flag("pin-boundary", a->pin_boundary, "freeze boundary sites at the identity");
  p.add("out", a->out, "transformed field file to write");
  p.add("gauge-out", a->gauge_out, "gauge file to write");
  p.require("in");
  sub->callback([a, &strict, &rc] {
    a->params->resolve();
    const wc::LatticeForm A = load_degree(a->in, 1, "connection");
    json out = report_header("gauge-fix", *a->params);
    wc::GaugeField gauge;
    wc::LatticeForm transformed;
    if (a->mode == "coulomb") {
      wc::CoulombResult res = wc::coulomb_relax(A, nullptr, a->max_iters, a->tol,
                                                a->restarts, a->pin_boundary, a->seed);
      out["report"] = json{{"objective", res.report.objective},
                           {"residual", res.report.residual},
                           {"iters", res.report.iters},
                           {"restarts", res.report.restarts},
                           {"converged", res.report.converged}};
      gauge = std::move(res.gauge);
      transformed = std::move(res.transformed);
      if (strict && !res.report.converged) rc = 3;
    } else if (a->mode == "axial") {
      if (a->axis < 0 || a->axis >= A.grid.n)
        throw std::runtime_error("--axis: out of range for dimension " +
                                 std::to_string(A.grid.n));
      gauge = wc::axial_gauge(A, a->axis);
      transformed = wc::gauge_transform(A, gauge);
      // The log-derivative stencil is one-sided at the top row, so the killed
      // component is checked on rows with a forward neighbor.
      double residual = 0.0;
      std::vector<int> idx(A.grid.n, 0);
      std::int64_t s = 0;
      do {
        if (idx[a->axis] < A.grid.S - 1)
          residual = std::max(residual, wc::norm(transformed.at(s, a->axis)));
        ++s;
      } while (A.grid.next(idx));
      out["report"] = json{{"residual", residual}, {"converged", true}};
    } else {
      throw std::runtime_error("--mode: expected coulomb or axial, got \"" + a->mode + "\"");
    }
    if (!a->out.empty()) {
      wc::write_field(a->out, wc::FieldData{std::move(transformed), "su2"});
      out["out"] = a->out;
    }
    if (!a->gauge_out.empty()) {
      wc::write_gauge(a->gauge_out, gauge);
      out["gauge_out"] = a->gauge_out;
    }
    emit(out);
  });
}

// ---------------------------------------------------------------------------
// grid-select / classify

struct SelectArgs {
  std::string in;
  double r = 0.0, delta = 0.0;
  int candidates = 0;
  std::shared_ptr<Params> params;
};

void add_grid_select(CLI::App& app, const bool& strict, int& rc) {
  auto* sub = app.add_subcommand("grid-select", "pick a cubeulation offset for (r, delta)");
  auto a = std::make_shared<SelectArgs>();
  a->params = std::make_shared<Params>(sub);
  Params& p = *a->params;
  p.add("in", a->in, "degree-1 field file");
  p.add("r", a->r, "cube edge (a multiple of the cell width)");
  p.add("delta", a->delta, "smallness parameter in (0,1)");
  p.add("candidates", a->candidates, "offsets to try (0 = three-per-axis sample)");
  p.require("in");
  p.require("r");
  p.require("delta");
  sub->callback([a, &strict, &rc] {
    a->params->resolve();
    const wc::LatticeForm A = load_degree(a->in, 1, "connection");
    const wc::OffsetSelection sel =
        wc::select_offset(A, wc::curvature(A), a->r, a->delta, a->candidates);
    json out = report_header("grid-select", *a->params);
    out["tau"] = sel.tau;
    out["t"] = sel.t;
    out["c1"] = sel.c1;
    out["worst_ratio"] = sel.worst_ratio;
    out["passed"] = sel.passed;
    out["candidates_evaluated"] = sel.candidates_evaluated;
    out["candidates_passed"] = sel.candidates_passed;
    json energy = json::object();
    for (const auto& [k, pair] : sel.energy)
      energy[std::to_string(k)] = json{{"A", pair[0]}, {"F", pair[1]}};
    out["skeleton_energy"] = std::move(energy);
    emit(out);
    if (strict && !sel.passed) rc = 3;
  });
}

struct ClassifyArgs {
  std::string in, tau_csv;
  double r = 0.0, delta = 0.0;
  int candidates = 0;
  bool faces = false;
  std::shared_ptr<Params> params;
};

void add_classify(CLI::App& app) {
  auto* sub = app.add_subcommand("classify", "good/bad cube classification at (r, delta)");
  auto a = std::make_shared<ClassifyArgs>();
  a->params = std::make_shared<Params>(sub);
  Params& p = *a->params;
  p.add("in", a->in, "degree-1 field file");
  p.add("r", a->r, "cube edge (a multiple of the cell width)");
  p.add("delta", a->delta, "smallness parameter in (0,1)");
  p.add("tau", a->tau_csv, "offset in cell units, comma-separated (default: grid-select)");
  p.add("candidates", a->candidates, "offsets for the default selection");
  p.add_flag("faces", a->faces, "list the closed bad 4-face set");
  p.require("in");
  p.require("r");
  p.require("delta");
  sub->callback([a] {
    a->params->resolve();
    const wc::LatticeForm A = load_degree(a->in, 1, "connection");
    const wc::LatticeForm F = wc::curvature(A);
    const wc::Grid& g = A.grid;
    const int m = static_cast<int>(std::llround(a->r / g.h));
    if (std::abs(m * g.h - a->r) > 1e-9 * std::max(1.0, std::abs(a->r)))
      throw std::runtime_error("--r: not a multiple of the cell width " +
                               std::to_string(g.h));
    std::vector<int> tau;
    if (a->params->set("tau")) {
      tau = parse_ints(a->tau_csv, "--tau");
    } else {
      tau = wc::select_offset(A, F, a->r, a->delta, a->candidates).tau;
    }
    const wc::CubeComplex cx(g, m, tau);
    const wc::FaceClassification cls = wc::classify_faces(A, F, cx, a->delta);
    json out = report_header("classify", *a->params);
    out["tau"] = tau;
    out["thresholds"] = cls.thresholds;
    out["n_cubes"] = cls.n_cubes;
    out["n_bad"] = cls.n_bad;
    out["bound_rhs"] = cls.bound_rhs;
    out["bound_constant"] = cls.bound_constant;
    json bad = json::array();
    for (const auto& [cube, good] : cls.cube_good)
      if (!good) bad.push_back(face_json(cube));
    out["bad_cubes"] = std::move(bad);
    if (a->faces) {
      json faces = json::array();
      for (const wc::FaceId& f : cls.bad_faces) faces.push_back(face_json(f));
      out["bad_faces"] = std::move(faces);
    }
    emit(out);
  });
}

// ---------------------------------------------------------------------------
// extend / approximate

struct ExtendArgs {
  std::string in, out, fout;
  double r = 0.0, delta = 0.0;
  int candidates = 0;
  bool no_mollify = false, faces = false;
  std::shared_ptr<Params> params;
};

void add_extend(CLI::App& app, const bool& strict, int& rc) {
  auto* sub = app.add_subcommand("extend", "one approximation step at a single (r, delta)");
  auto a = std::make_shared<ExtendArgs>();
  a->params = std::make_shared<Params>(sub);
  Params& p = *a->params;
  p.add("in", a->in, "degree-1 field file");
  p.add("r", a->r, "cube edge (a multiple of the cell width)");
  p.add("delta", a->delta, "smallness parameter in (0,1)");
  p.add("candidates", a->candidates, "offsets for the selection");
  p.add_flag("no-mollify", a->no_mollify, "skip the final box blend");
  p.add_flag("faces", a->faces, "list the singular dual faces");
  p.add("out", a->out, "approximant field file to write");
  p.add("fout", a->fout, "approximant curvature field file to write");
  p.require("in");
  p.require("r");
  p.require("delta");
  sub->callback([a, &strict, &rc] {
    a->params->resolve();
    const wc::LatticeForm A = load_degree(a->in, 1, "connection");
    wc::ApproxOpts opts;
    opts.mollify = !a->no_mollify;
    opts.offset_candidates = a->candidates;
    const std::vector<wc::ExtensionResult> results =
        wc::approximate(A, {wc::ScheduleEntry{a->r, a->delta}}, opts);
    const wc::ExtensionResult& res = results.front();
    json out = report_header("extend", *a->params);
    out.update(entry_json(res, a->faces));
    if (res.ok) {
      if (!a->out.empty()) {
        wc::write_field(a->out, wc::FieldData{res.A_tilde, "su2"});
        out["out"] = a->out;
      }
      if (!a->fout.empty()) {
        wc::write_field(a->fout, wc::FieldData{res.F_tilde, "su2"});
        out["fout"] = a->fout;
      }
    }
    emit(out);
    if (strict && !res.ok) rc = 3;
  });
}

struct ApproximateArgs {
  std::string in, schedule, out_prefix, csv;
  int candidates = 0;
  bool no_mollify = false, faces = false;
  std::shared_ptr<Params> params;
};

void add_approximate(CLI::App& app, const bool& strict, int& rc) {
  auto* sub = app.add_subcommand("approximate", "multiscale approximation over a schedule");
  auto a = std::make_shared<ApproximateArgs>();
  a->params = std::make_shared<Params>(sub);
  Params& p = *a->params;
  p.add("in", a->in, "degree-1 field file");
  p.add("schedule", a->schedule, "comma-separated r:delta entries, r strictly decreasing");
  p.add("candidates", a->candidates, "offsets for each selection");
  p.add_flag("no-mollify", a->no_mollify, "skip the final box blend");
  p.add_flag("faces", a->faces, "list the singular dual faces per entry");
  p.add("out-prefix", a->out_prefix, "write <prefix><i>_A.field and <prefix><i>_F.field");
  p.add("csv", a->csv, "CSV summary file to write");
  p.require("in");
  p.require("schedule");
  sub->callback([a, &strict, &rc] {
    a->params->resolve();
    const wc::LatticeForm A = load_degree(a->in, 1, "connection");
    const std::vector<wc::ScheduleEntry> schedule = parse_schedule(a->schedule);
    wc::ApproxOpts opts;
    opts.mollify = !a->no_mollify;
    opts.offset_candidates = a->candidates;
    const std::vector<wc::ExtensionResult> results = wc::approximate(A, schedule, opts);
    json out = report_header("approximate", *a->params);
    json entries = json::array();
    bool all_ok = true;
    double total = 0.0;
    for (std::size_t i = 0; i < results.size(); ++i) {
      const wc::ExtensionResult& res = results[i];
      json e = entry_json(res, a->faces);
      if (res.ok && !a->out_prefix.empty()) {
        const std::string base = a->out_prefix + std::to_string(i);
        wc::write_field(base + "_A.field", wc::FieldData{res.A_tilde, "su2"});
        wc::write_field(base + "_F.field", wc::FieldData{res.F_tilde, "su2"});
        e["out"] = base + "_A.field";
        e["fout"] = base + "_F.field";
      }
      entries.push_back(std::move(e));
      all_ok = all_ok && res.ok;
      total += res.seconds;
    }
    out["entries"] = std::move(entries);
    out["seconds"] = total;
    if (!a->csv.empty()) {
      std::ofstream csv(a->csv);
      if (!csv) throw std::runtime_error("cannot open " + a->csv);
      csv << "r,delta,err_A_L2,err_F_L2,n_bad,bad_volume,singular_faces,seconds\n";
      for (const wc::ExtensionResult& res : results) {
        if (!res.ok) continue;
        csv << res.r << ',' << res.delta << ',' << res.err_A << ',' << res.err_F << ','
            << res.n_bad << ',' << res.bad_volume << ',' << res.singular.size() << ','
            << res.seconds << "\n";
      }
      out["csv"] = a->csv;
    }
    emit(out);
    if (strict && !all_ok) rc = 3;
  });
}

// ---------------------------------------------------------------------------
// holonomy / su2-equal

struct HolonomyArgs {
  std::string in, loop_csv, corner_csv, path_csv;
  std::shared_ptr<Params> params;
};

void add_holonomy(CLI::App& app) {
  auto* sub = app.add_subcommand("holonomy", "path-ordered exponential along a lattice path");
  auto a = std::make_shared<HolonomyArgs>();
  a->params = std::make_shared<Params>(sub);
  Params& p = *a->params;
  p.add("in", a->in, "degree-1 field file");
  p.add("loop", a->loop_csv, "rectangular loop i,j,ki,kj in the (i,j) plane");
  p.add("corner", a->corner_csv, "loop corner as comma-separated site rows");
  p.add("path", a->path_csv, "explicit comma-separated site indices");
  p.require("in");
  sub->callback([a] {
    a->params->resolve();
    const wc::LatticeForm A = load_degree(a->in, 1, "connection");
    const wc::Grid& g = A.grid;
    const bool has_loop = a->params->set("loop");
    const bool has_path = a->params->set("path");
    if (has_loop == has_path)
      throw std::runtime_error("holonomy: give exactly one of --loop and --path");
    wc::LatticePath path;
    if (has_loop) {
      const std::vector<int> spec = parse_ints(a->loop_csv, "--loop");
      if (spec.size() != 4)
        throw std::runtime_error("--loop: expected i,j,ki,kj");
      std::vector<int> corner(g.n, 0);
      if (a->params->set("corner")) {
        corner = parse_ints(a->corner_csv, "--corner");
        if (static_cast<int>(corner.size()) != g.n)
          throw std::runtime_error("--corner: expected " + std::to_string(g.n) + " rows");
      }
      path = wc::rect_loop(g, g.index(corner), spec[0], spec[1], spec[2], spec[3]);
    } else {
      for (const int s : parse_ints(a->path_csv, "--path")) {
        if (s < 0 || s >= g.sites())
          throw std::runtime_error("--path: site " + std::to_string(s) + " out of range");
        path.sites.push_back(s);
      }
    }
    const wc::Group hol = wc::path_ordered_exp(A, path);
    json out = report_header("holonomy", *a->params);
    out["sites"] = path.sites.size();
    out["holonomy"] = group_json(hol);
    out["rotation_angle"] = 2.0 * std::acos(std::clamp(std::abs(hol.w), 0.0, 1.0));
    emit(out);
  });
}

struct EqualArgs {
  std::string a_path, b_path;
  double tol = 1e-8;
  std::shared_ptr<Params> params;
};

void add_su2_equal(CLI::App& app) {
  auto* sub = app.add_subcommand("su2-equal",
                                 "are two curvature files conjugate up to tolerance?");
  auto a = std::make_shared<EqualArgs>();
  a->params = std::make_shared<Params>(sub);
  Params& p = *a->params;
  p.add("a", a->a_path, "first degree-2 field file");
  p.add("b", a->b_path, "second degree-2 field file");
  p.add("tol", a->tol, "equality tolerance");
  p.require("a");
  p.require("b");
  sub->callback([a] {
    a->params->resolve();
    const wc::LatticeForm F = load_degree(a->a_path, 2, "curvature");
    const wc::LatticeForm Fp = load_degree(a->b_path, 2, "curvature");
    const wc::DistanceReport d = wc::d_curv(F, Fp);
    const wc::DistanceReport dd = wc::delta_curv(F, Fp);
    bool gram = true;
    for (std::int64_t s = 0; s < F.grid.sites() && gram; ++s)
      gram = wc::gram_equivalence(wc::CurvSample(F, s), wc::CurvSample(Fp, s), a->tol)
                 .equivalent;
    json out = report_header("su2-equal", *a->params);
    out["d_curv"] = d.value;
    out["delta_curv"] = dd.value;
    out["gram_equivalent"] = gram;
    out["equal"] = d.value <= a->tol && gram;
    emit(out);
  });
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"lattice SU(2) connections: field files, metrics, gauge fixing, and "
               "multiscale approximation"};
  app.require_subcommand(1);
  bool strict = false;
  app.add_flag("--strict", strict,
               "exit 3 when an optimizer or selection reports failure");
  int rc = 0;

  add_generate(app);
  add_energy(app);
  add_curvature(app);
  add_check_bianchi(app);
  add_distance(app, strict, rc);
  add_gauge_fix(app, strict, rc);
  add_grid_select(app, strict, rc);
  add_classify(app);
  add_extend(app, strict, rc);
  add_approximate(app, strict, rc);
  add_holonomy(app);
  add_su2_equal(app);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const std::exception& e) {
    json err;
    err["schema"] = "weakconn/1";
    err["error"] = e.what();
    emit(err);
    return 2;
  }
  return rc;
}
