// cms: certificates and experiments for contractive Markov systems.
//
// Subcommands: validate | analyze | simulate | code | thermo | refine |
// subsystems. Exit codes: 0 success, 1 validation error, 2 undecided
// verdicts under --strict.

#include <fstream>
#include <iostream>
#include <random>
#include <sstream>

#include "CLI11.hpp"
#include "cms/analysis.hpp"
#include "cms/coding.hpp"
#include "cms/manifest.hpp"
#include "cms/refine.hpp"
#include "cms/simulate.hpp"
#include "cms/subshift.hpp"
#include "cms/system.hpp"
#include "cms/thermo.hpp"
#include "json.hpp"

using nlohmann::json;

namespace {

struct CommonOpts {
  std::string spec_path;
  std::string format = "text";
  std::string out;
  bool strict = false;
};

cms::ValidatedSystem load(const std::string& path) {
  return cms::validate(cms::parse_spec_file(path));
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << content;
}

void write_manifest(const std::string& beside, const std::string& spec_path,
                    const std::string& command, const std::vector<std::string>& argv,
                    std::uint64_t seed) {
  cms::RunManifest m;
  m.spec_hash = cms::file_hash_hex(spec_path);
  m.command = command;
  m.argv = argv;
  m.seed = seed;
  m.timestamp = cms::iso8601_now();
  write_file(beside + ".manifest.json", m.to_json_string());
}

std::vector<std::string> split_csv(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

std::uint64_t ensure_seed(CLI::Option* seed_opt, std::uint64_t seed) {
  if (seed_opt->count() > 0) return seed;
  std::random_device rd;
  std::uint64_t s = (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
  std::cout << "seed: " << s << " (generated; pass --seed to reproduce)\n";
  return s;
}

std::string csv_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

// data-identical SVG bar rendering of the histogram CSV
std::string histogram_svg(const std::vector<std::tuple<int, long long, double>>& rows) {
  const int w = 640, h = 360, pad = 40;
  double maxf = 1e-12;
  for (const auto& [id, c, f] : rows) maxf = std::max(maxf, f);
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h
     << "\">\n";
  double bw = rows.empty() ? 1.0 : static_cast<double>(w - 2 * pad) / rows.size();
  int k = 0;
  for (const auto& [id, c, f] : rows) {
    double bh = (h - 2 * pad) * (f / maxf);
    os << "<rect x=\"" << pad + k * bw << "\" y=\"" << h - pad - bh << "\" width=\""
       << bw * 0.9 << "\" height=\"" << bh << "\" fill=\"steelblue\"/>\n";
    os << "<text x=\"" << pad + k * bw + bw * 0.45 << "\" y=\"" << h - pad + 14
       << "\" font-size=\"10\" text-anchor=\"middle\">" << id << "</text>\n";
    ++k;
  }
  os << "</svg>\n";
  return os.str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"contractive Markov system toolkit"};
  app.require_subcommand(1);
  std::vector<std::string> raw_args(argv, argv + argc);

  // ---- validate ----
  auto* c_validate = app.add_subcommand("validate", "parse and validate a system spec");
  CommonOpts v_opts;
  c_validate->add_option("spec", v_opts.spec_path, "system spec JSON")->required();

  // ---- analyze ----
  auto* c_analyze = app.add_subcommand("analyze", "exact certificates and verdicts");
  CommonOpts a_opts;
  int a_nmax = 0;
  c_analyze->add_option("spec", a_opts.spec_path, "system spec JSON")->required();
  c_analyze->add_option("--n-max", a_nmax, "iteration cap for the Omega computation");
  c_analyze->add_option("--format", a_opts.format, "text|json")->check(CLI::IsMember({"text", "json"}));
  c_analyze->add_option("--out", a_opts.out, "write the report here as well");
  c_analyze->add_flag("--strict", a_opts.strict, "exit 2 on undecided verdicts");

  // ---- simulate ----
  auto* c_sim = app.add_subcommand("simulate", "seeded Monte Carlo estimation");
  CommonOpts s_opts;
  double s_x0 = 0.5;
  long long s_steps = 100000, s_burn = -1;
  std::uint64_t s_seed = 0;
  int s_replicas = 1, s_threads = 1;
  std::size_t s_reservoir = 4096;
  std::string s_plot;
  c_sim->add_option("spec", s_opts.spec_path, "system spec JSON")->required();
  c_sim->add_option("--x0", s_x0, "start state (interval backend)");
  c_sim->add_option("--steps", s_steps, "transitions per replica");
  c_sim->add_option("--burn", s_burn, "burn-in (default steps/10)");
  auto* s_seed_opt = c_sim->add_option("--seed", s_seed, "RNG seed");
  c_sim->add_option("--replicas", s_replicas, "independent replicas");
  c_sim->add_option("--threads", s_threads, "worker threads");
  c_sim->add_option("--reservoir", s_reservoir, "reservoir size per replica");
  c_sim->add_option("--out", s_opts.out, "histogram CSV path");
  c_sim->add_option("--plot", s_plot, "optional SVG histogram");

  // ---- code ----
  auto* c_code = app.add_subcommand("code", "evaluate the coding map");
  CommonOpts k_opts;
  std::string k_word, k_period;
  bool k_exact = false;
  int k_depth = -1;
  c_code->add_option("spec", k_opts.spec_path, "system spec JSON")->required();
  c_code->add_option("--word", k_word, "finite word / prefix, comma separated, oldest first");
  c_code->add_option("--period", k_period, "period block, comma separated");
  c_code->add_flag("--exact", k_exact, "exact evaluation (needs --period)");
  c_code->add_option("--depth", k_depth, "truncated evaluation depth");

  // ---- thermo ----
  auto* c_thermo = app.add_subcommand("thermo", "free-energy residual report");
  CommonOpts t_opts;
  int t_memory = 1;
  long long t_steps = 200000;
  std::uint64_t t_seed = 0;
  double t_x0 = 0.5;
  c_thermo->add_option("spec", t_opts.spec_path, "system spec JSON")->required();
  c_thermo->add_option("--memory", t_memory, "conditioning block length");
  c_thermo->add_option("--steps", t_steps, "trajectory length");
  auto* t_seed_opt = c_thermo->add_option("--seed", t_seed, "RNG seed");
  c_thermo->add_option("--x0", t_x0, "start state (interval backend)");
  c_thermo->add_option("--out", t_opts.out, "write the JSON report here");

  // ---- refine ----
  auto* c_refine = app.add_subcommand("refine", "build and verify a refinement");
  CommonOpts r_opts;
  std::string r_cuts;
  c_refine->add_option("spec", r_opts.spec_path, "system spec JSON")->required();
  c_refine->add_option("--cuts", r_cuts, "e.g. \"2@1/2:left-closed,2@3/4:right-closed\"")
      ->required();
  c_refine->add_option("--out", r_opts.out, "write the refined spec JSON here");

  // ---- subsystems ----
  auto* c_subs = app.add_subcommand("subsystems", "closed Markov subsystems");
  CommonOpts u_opts;
  c_subs->add_option("spec", u_opts.spec_path, "system spec JSON")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (c_validate->parsed()) {
      auto sys = load(v_opts.spec_path);
      if (sys.backend == cms::Backend::interval) {
        std::cout << "valid: " << sys.atoms.size() << " atoms, " << sys.edges.size()
                  << " edges (interval backend)";
        if (sys.tail)
          std::cout << " + tail family truncated at n <= " << sys.tail->spec.truncate_at
                    << " (eps_tail = " << sys.tail->eps_tail << ")";
        std::cout << "\n";
      } else {
        std::cout << "valid: " << sys.shift->vertices.size() << " vertices, "
                  << sys.shift->edges.size() << " edges (subshift backend, memory "
                  << sys.shift->memory << ")\n";
      }
      return 0;
    }

    if (c_analyze->parsed()) {
      auto sys = load(a_opts.spec_path);
      auto rep = cms::classify(sys, a_nmax);
      std::string text = a_opts.format == "json" ? rep.to_json_string() : rep.to_text();
      std::cout << text;
      if (!a_opts.out.empty()) {
        write_file(a_opts.out, text);
        write_manifest(a_opts.out, a_opts.spec_path, "analyze", raw_args, 0);
      }
      if (a_opts.strict) {
        bool undecided = !rep.omega.decided ||
                         rep.degeneracy.tag == cms::DegeneracyTag::undecided ||
                         rep.consistency.tag == cms::ConsistencyTag::undecided;
        if (undecided) return 2;
      }
      return 0;
    }

    if (c_sim->parsed()) {
      auto sys = load(s_opts.spec_path);
      s_seed = ensure_seed(s_seed_opt, s_seed);
      if (s_burn < 0) s_burn = s_steps / 10;
      cms::SimOptions opt;
      opt.x0 = s_x0;
      opt.steps = s_steps;
      opt.burn_in = s_burn;
      opt.seed = s_seed;
      opt.reservoir = s_reservoir;
      opt.keep_trajectory = false;
      cms::EmpiricalMeasure m = cms::run_replicas(sys, opt, s_replicas, s_threads);

      std::vector<std::tuple<int, long long, double>> rows;
      for (int id : sys.atom_ids()) {
        auto it = m.histogram.find(id);
        long long c = it == m.histogram.end() ? 0 : it->second;
        rows.push_back({id, c, m.total ? static_cast<double>(c) / m.total : 0.0});
      }
      std::ostringstream hist;
      hist << "atom_id,count,frequency\n";
      for (const auto& [id, c, f] : rows)
        hist << id << "," << c << "," << csv_double(f) << "\n";

      std::ostringstream mom;
      mom << "metric,value\n";
      mom << "samples," << m.total << "\n";
      mom << "mean," << csv_double(m.mean()) << "\n";
      mom << "second_moment," << csv_double(m.second_moment()) << "\n";
      if (sys.backend == cms::Backend::interval && !m.reservoir.empty()) {
        for (const auto& [name, v] : cms::invariance_residual(sys, m))
          mom << "residual_" << name << "," << csv_double(v) << "\n";
        auto lm = cms::l_moment_check(sys, m);
        mom << "l_mean," << csv_double(lm.l_mean) << "\n";
        mom << "l_bound," << csv_double(lm.bound) << "\n";
        mom << "l_pass," << (lm.pass ? 1 : 0) << "\n";
      }

      if (!s_opts.out.empty()) {
        write_file(s_opts.out, hist.str());
        std::string mom_path = s_opts.out;
        auto dot = mom_path.rfind('.');
        mom_path = (dot == std::string::npos ? mom_path : mom_path.substr(0, dot)) +
                   "_moments.csv";
        write_file(mom_path, mom.str());
        write_manifest(s_opts.out, s_opts.spec_path, "simulate", raw_args, s_seed);
        std::cout << "wrote " << s_opts.out << " and " << mom_path << "\n";
      } else {
        std::cout << hist.str() << "\n" << mom.str();
      }
      if (!s_plot.empty()) write_file(s_plot, histogram_svg(rows));
      return 0;
    }

    if (c_code->parsed()) {
      auto sys = load(k_opts.spec_path);
      if (k_period.empty() && k_depth < 0) {
        // plain finite-word evaluation
        cms::SymbolWord w;
        w.symbols = split_csv(k_word);
        cms::Rational v = cms::eval_X(sys, w);
        std::cout << "X = " << v.str() << " ~ " << v.to_double() << "\n";
        auto atom = sys.atom_of(v);
        if (atom) std::cout << "atom: " << *atom << "\n";
        return 0;
      }
      cms::EventuallyPeriodicWord w;
      w.prefix.symbols = split_csv(k_word);
      w.period.symbols = split_csv(k_period);
      if (k_exact || k_depth < 0) {
        cms::Rational v = cms::coding_map_exact(sys, w);
        std::cout << "F = " << v.str() << " ~ " << v.to_double() << "\n";
        auto atom = sys.atom_of(v);
        if (atom) std::cout << "atom: " << *atom << "\n";
      } else {
        auto t = cms::coding_map_truncated(
            sys, [&](std::size_t k) { return w.backward_symbol(k); }, k_depth);
        std::cout << "X_m = " << t.estimate.str() << " ~ " << t.estimate.to_double() << "\n";
        std::cout << "error bound (conditional on the good sets): " << t.error_bound << "\n";
        auto atom = sys.atom_of(t.estimate);
        if (atom) std::cout << "atom: " << *atom << "\n";
      }
      return 0;
    }

    if (c_thermo->parsed()) {
      auto sys = load(t_opts.spec_path);
      t_seed = ensure_seed(t_seed_opt, t_seed);
      cms::SimOptions opt;
      opt.x0 = t_x0;
      opt.steps = t_steps;
      opt.burn_in = 0;
      opt.seed = t_seed;
      opt.reservoir = 0;
      auto rr = cms::run(sys, opt);
      auto fe = cms::free_energy_residual(sys, rr.trajectory, t_memory);
      json j;
      j["memory"] = fe.memory;
      j["H_m"] = fe.h;
      j["H_m_bits"] = fe.h / std::log(2.0);
      j["u_avg"] = fe.u_avg;
      j["residual"] = fe.rho;
      j["se"] = fe.se;
      if (fe.entropy_possibly_infinite) {
        j["verdict"] = "entropy possibly infinite; residual test inapplicable";
      } else {
        j["verdict"] = std::abs(fe.rho) <= std::max(0.01, 3.0 * fe.se)
                           ? "equilibrium-consistent"
                           : "residual significantly nonzero";
      }
      std::string text = j.dump(2);
      std::cout << text << "\n";
      if (!t_opts.out.empty()) {
        write_file(t_opts.out, text);
        write_manifest(t_opts.out, t_opts.spec_path, "thermo", raw_args, t_seed);
      }
      return 0;
    }

    if (c_refine->parsed()) {
      auto sys = load(r_opts.spec_path);
      std::vector<cms::CutSpec> cuts;
      for (const auto& part : split_csv(r_cuts)) {
        auto at_pos = part.find('@');
        auto colon = part.find(':');
        if (at_pos == std::string::npos)
          throw cms::SpecError("cut syntax: atom@point[:left-closed|:right-closed]");
        cms::CutSpec c;
        c.atom = std::stoi(part.substr(0, at_pos));
        std::string point = colon == std::string::npos
                                ? part.substr(at_pos + 1)
                                : part.substr(at_pos + 1, colon - at_pos - 1);
        c.at = cms::Rational::parse(point);
        c.left_closed = colon == std::string::npos || part.substr(colon + 1) == "left-closed";
        cuts.push_back(c);
      }
      auto ref = cms::build_refinement(sys, cuts);
      std::cout << "refined: " << ref.refined.atoms.size() << " atoms, "
                << ref.refined.edges.size() << " edges\n";
      std::cout << "refinement map:";
      for (const auto& [re, be] : ref.r) std::cout << " " << re << "->" << be;
      std::cout << "\n";
      auto rep = cms::classify(ref.refined, 0);
      std::cout << "refined verdicts: degeneracy "
                << (rep.degeneracy.tag == cms::DegeneracyTag::non_degenerate ? "non-degenerate"
                                                                             : "undecided")
                << ", consistency "
                << (rep.consistency.tag == cms::ConsistencyTag::consistent ? "consistent"
                                                                           : "other")
                << "\n";
      std::string spec_json = cms::refined_spec_json(ref);
      if (!r_opts.out.empty()) {
        write_file(r_opts.out, spec_json);
        write_manifest(r_opts.out, r_opts.spec_path, "refine", raw_args, 0);
        std::cout << "wrote " << r_opts.out << "\n";
      } else {
        std::cout << spec_json << "\n";
      }
      return 0;
    }

    if (c_subs->parsed()) {
      auto sys = load(u_opts.spec_path);
      for (const auto& s : cms::closed_subsystems(sys)) {
        std::cout << "{";
        bool first = true;
        for (int id : s.atoms) {
          std::cout << (first ? "" : ",") << id;
          first = false;
        }
        std::cout << "} " << (s.closed_in_k ? "closed-in-K" : "not-closed")
                  << (s.minimal_closed ? " minimal-closed" : "") << "\n";
      }
      return 0;
    }
  } catch (const cms::SpecError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const cms::ValidationError& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
