// geobridge: end-to-end driver for geodesic-bridge generative modeling on
// the sphere and the rotation group. Subcommands: datagen | train | sample
// | eval | bench. One sectioned key=value config file drives a run; flags
// override config keys. Every command writes its outputs, a copy of the
// resolved configuration, and the library version into a fresh run
// directory named by config hash and timestamp, and removes that directory
// again if it fails.

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "geobridge/distributions.hpp"
#include "geobridge/evaluation.hpp"
#include "geobridge/fieldnet.hpp"
#include "geobridge/samplers.hpp"
#include "geobridge/train.hpp"
#include "geobridge/version.hpp"

namespace fs = std::filesystem;
using namespace geobridge;

namespace {

struct Options {
  // [run]
  std::string route = "s2";
  std::uint64_t seed = 0;
  std::string outdir = "runs";
  int threads = 0;  // 0 = hardware
  // [prior]
  std::string prior_kind = "uniform";  // uniform | vmf | wrapped
  int prior_centers = 8;
  double prior_kappa = 256.0;
  double prior_sigma2 = 0.01;
  std::uint64_t prior_seed = 1;
  // [target]
  std::string target_kind = "vmf";  // vmf | wrapped | csv | latlon | uniform
  std::string target_path;
  int target_centers = 8;
  double target_kappa = 256.0;
  double target_sigma2 = 0.01;
  long target_count = 20000;
  std::uint64_t target_seed = 2;
  // [train]
  long iterations = 5000;
  long batch = 512;
  double lr = 0.003;
  double weight_decay = 0.0;
  int lr_step = 1000;
  double lr_gamma = 0.7;
  long eval_every = 100;
  int hidden = 128;
  int depth = 3;
  int time_freqs = 4;
  std::string velocity_activation = "tanh";
  bool train_score = true;
  std::string data_csv;  // training data file; overrides the target spec
  // [sample]
  std::string scheme = "ode-rk4";
  int steps = 100;
  double epsilon = 0.0;
  long sample_count = 10000;
  std::string direction = "forward";
  std::string velocity_checkpoint;
  std::string score_checkpoint;
  std::string start_csv;  // start states (backward runs); else prior draws
  bool record_trajectories = false;
  long record_limit = 16;
  // [eval]
  std::string generated_csv;
  std::string truth_csv;
  long max_n = 2048;
  int knn_k = 5;
  bool with_nll = false;
  int nll_steps = 64;
  std::string eval_velocity_checkpoint;
  // [bench]
  std::string bench_schemes = "grw,esde-em,esde-heun";
  double bench_epsilon = 0.5;
  std::string bench_steps = "16,32,64,128,256,512";
  long bench_paths = 10000;
  long bench_weak_paths = 0;
};

/// One configurable field: section-qualified key plus a typed binding.
struct Field {
  std::string key;  // "run.route"
  std::variant<std::string*, int*, long*, double*, bool*, std::uint64_t*> ref;
};

std::vector<Field> field_registry(Options& o) {
  return {
      {"run.route", &o.route},
      {"run.seed", &o.seed},
      {"run.outdir", &o.outdir},
      {"run.threads", &o.threads},
      {"prior.kind", &o.prior_kind},
      {"prior.centers", &o.prior_centers},
      {"prior.kappa", &o.prior_kappa},
      {"prior.sigma2", &o.prior_sigma2},
      {"prior.seed", &o.prior_seed},
      {"target.kind", &o.target_kind},
      {"target.path", &o.target_path},
      {"target.centers", &o.target_centers},
      {"target.kappa", &o.target_kappa},
      {"target.sigma2", &o.target_sigma2},
      {"target.count", &o.target_count},
      {"target.seed", &o.target_seed},
      {"train.iterations", &o.iterations},
      {"train.batch", &o.batch},
      {"train.lr", &o.lr},
      {"train.weight_decay", &o.weight_decay},
      {"train.lr_step", &o.lr_step},
      {"train.lr_gamma", &o.lr_gamma},
      {"train.eval_every", &o.eval_every},
      {"train.hidden", &o.hidden},
      {"train.depth", &o.depth},
      {"train.time_freqs", &o.time_freqs},
      {"train.velocity_activation", &o.velocity_activation},
      {"train.score", &o.train_score},
      {"train.data", &o.data_csv},
      {"sample.scheme", &o.scheme},
      {"sample.steps", &o.steps},
      {"sample.epsilon", &o.epsilon},
      {"sample.count", &o.sample_count},
      {"sample.direction", &o.direction},
      {"sample.velocity_checkpoint", &o.velocity_checkpoint},
      {"sample.score_checkpoint", &o.score_checkpoint},
      {"sample.start", &o.start_csv},
      {"sample.record", &o.record_trajectories},
      {"sample.record_limit", &o.record_limit},
      {"eval.generated", &o.generated_csv},
      {"eval.truth", &o.truth_csv},
      {"eval.max_n", &o.max_n},
      {"eval.k", &o.knn_k},
      {"eval.nll", &o.with_nll},
      {"eval.nll_steps", &o.nll_steps},
      {"eval.velocity_checkpoint", &o.eval_velocity_checkpoint},
      {"bench.schemes", &o.bench_schemes},
      {"bench.epsilon", &o.bench_epsilon},
      {"bench.steps", &o.bench_steps},
      {"bench.paths", &o.bench_paths},
      {"bench.weak_paths", &o.bench_weak_paths},
  };
}

void assign_field(const Field& field, const std::string& value) {
  try {
    std::visit(
        [&](auto* ptr) {
          using T = std::remove_pointer_t<decltype(ptr)>;
          if constexpr (std::is_same_v<T, std::string>) {
            *ptr = value;
          } else if constexpr (std::is_same_v<T, bool>) {
            if (value == "true" || value == "1") *ptr = true;
            else if (value == "false" || value == "0") *ptr = false;
            else throw ConfigError("expected true/false for " + field.key);
          } else if constexpr (std::is_same_v<T, double>) {
            *ptr = std::stod(value);
          } else if constexpr (std::is_same_v<T, std::uint64_t>) {
            *ptr = std::stoull(value);
          } else {
            *ptr = static_cast<T>(std::stoll(value));
          }
        },
        field.ref);
  } catch (const Error&) {
    throw;
  } catch (const std::exception&) {
    throw ConfigError("bad value '" + value + "' for key " + field.key);
  }
}

std::string field_to_string(const Field& field) {
  return std::visit(
      [&](auto* ptr) -> std::string {
        using T = std::remove_pointer_t<decltype(ptr)>;
        if constexpr (std::is_same_v<T, std::string>) {
          return *ptr;
        } else if constexpr (std::is_same_v<T, bool>) {
          return *ptr ? "true" : "false";
        } else if constexpr (std::is_same_v<T, double>) {
          char buf[40];
          std::snprintf(buf, sizeof buf, "%.17g", *ptr);
          return buf;
        } else {
          return std::to_string(*ptr);
        }
      },
      field.ref);
}

/// Sectioned key=value config: [section] heads, '#' comments, blank lines.
void apply_config_file(const std::string& path, std::vector<Field>& fields) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config: " + path);
  std::string line, section;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto first = line.find_first_not_of(" \t");
    if (first == std::string::npos) continue;
    const auto last = line.find_last_not_of(" \t");
    line = line.substr(first, last - first + 1);
    if (line.empty() || line[0] == '#') continue;
    if (line.front() == '[' && line.back() == ']') {
      section = line.substr(1, line.size() - 2);
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ParseError(path + ":" + std::to_string(lineno) + ": expected key=value");
    const std::string key = section.empty() ? line.substr(0, eq)
                                            : section + "." + line.substr(0, eq);
    const std::string value = line.substr(eq + 1);
    bool known = false;
    for (auto& f : fields) {
      if (f.key == key) {
        assign_field(f, value);
        known = true;
        break;
      }
    }
    if (!known)
      throw ConfigError(path + ":" + std::to_string(lineno) + ": unknown key '" + key + "'");
  }
}

std::string resolved_config_str(std::vector<Field>& fields) {
  std::ostringstream out;
  out << "# geobridge " << kVersion << "\n";
  std::string section;
  for (auto& f : fields) {
    const auto dot = f.key.find('.');
    const std::string sec = f.key.substr(0, dot);
    if (sec != section) {
      out << "[" << sec << "]\n";
      section = sec;
    }
    out << f.key.substr(dot + 1) << "=" << field_to_string(f) << "\n";
  }
  return out.str();
}

struct Route {
  ManifoldKind native;
  int process_dim;
  bool embedded;  // rotation states carried on the sphere in R^6
};

Route parse_route(const std::string& name) {
  if (name == "s2") return {ManifoldKind::Sphere, 3, false};
  if (name == "so3-es" || name == "so3-em") return {ManifoldKind::Rotation, 6, true};
  throw ConfigError("unknown route '" + name + "' (expected s2 | so3-es | so3-em)");
}

std::vector<std::string> split_list(const std::string& csv) {
  std::vector<std::string> out;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

/// Process-space points of a native sample set (rotations ride on the unit
/// sphere in R^6 through the truncation embedding).
Eigen::MatrixXd to_process(const Route& route, const SampleSet& native) {
  if (!route.embedded) {
    if (native.kind != ManifoldKind::Sphere || native.points.cols() != 3)
      throw ConfigError("route s2 expects sphere samples in R^3");
    return native.points;
  }
  if (native.kind != ManifoldKind::Rotation)
    throw ConfigError("rotation routes expect rotation samples");
  Eigen::MatrixXd x(native.size(), 6);
  for (Eigen::Index i = 0; i < native.size(); ++i)
    x.row(i) = embed::to_unit_sphere(row_to_rotation(native.points.row(i))).transpose();
  return x;
}

/// Native sample set of process-space endpoints (orthonormalization maps
/// sphere states in R^6 back to rotations).
SampleSet from_process(const Route& route, const Eigen::MatrixXd& x, std::uint64_t seed,
                       const std::string& source) {
  SampleSet s;
  s.seed = seed;
  s.source = source;
  if (!route.embedded) {
    s.kind = ManifoldKind::Sphere;
    s.points = x;
    return s;
  }
  s.kind = ManifoldKind::Rotation;
  s.points.resize(x.rows(), 9);
  for (Eigen::Index i = 0; i < x.rows(); ++i)
    s.points.row(i) = rotation_to_row(embed::from_unit_sphere(x.row(i).transpose()));
  return s;
}

MixtureSpec make_mixture(const Options& opt, bool for_prior) {
  const std::string kind = for_prior ? opt.prior_kind : opt.target_kind;
  const int centers = for_prior ? opt.prior_centers : opt.target_centers;
  const std::uint64_t seed = for_prior ? opt.prior_seed : opt.target_seed;
  if (kind == "vmf")
    return make_random_vmf_spec(centers, for_prior ? opt.prior_kappa : opt.target_kappa, seed);
  if (kind == "wrapped")
    return make_random_wrapped_spec(centers, for_prior ? opt.prior_sigma2 : opt.target_sigma2,
                                    seed);
  throw ConfigError("no mixture for kind '" + kind + "'");
}

SampleSet synthesize_target(const Options& opt, const Route& route, int threads) {
  if (opt.target_kind == "csv") return read_sample_csv(opt.target_path);
  if (opt.target_kind == "latlon") return ingest_latlon_csv(opt.target_path);
  if (opt.target_kind == "uniform")
    return sample_uniform(route.native, route.embedded ? 9 : 3, opt.target_count,
                          opt.target_seed, threads);
  if (opt.target_kind == "vmf") {
    if (route.embedded) throw ConfigError("vmf targets live on the s2 route");
    return sample_vmf_mixture(make_mixture(opt, false), opt.target_count, opt.target_seed,
                              threads);
  }
  if (opt.target_kind == "wrapped") {
    if (!route.embedded) throw ConfigError("wrapped targets live on the rotation routes");
    return sample_wrapped_gaussian_so3(make_mixture(opt, false), opt.target_count,
                                       opt.target_seed, threads);
  }
  throw ConfigError("unknown target kind '" + opt.target_kind + "'");
}

/// Prior sampler in process space per route and prior config.
PriorSampler make_route_prior(const Options& opt, const Route& route) {
  if (opt.prior_kind == "uniform") {
    if (opt.route == "so3-em") return make_embedded_haar_prior();
    return make_uniform_prior(route.process_dim);  // s2, and so3-es on the 6d sphere
  }
  if (opt.prior_kind == "vmf") {
    if (route.embedded) throw ConfigError("vmf priors live on the s2 route");
    const MixtureSpec spec = make_mixture(opt, true);
    return [spec](std::mt19937_64& rng, Eigen::Index count) {
      const std::uint64_t sub = rng();
      return sample_vmf_mixture(spec, count, sub).points;
    };
  }
  if (opt.prior_kind == "wrapped") {
    if (!route.embedded) throw ConfigError("wrapped priors live on the rotation routes");
    const MixtureSpec spec = make_mixture(opt, true);
    return [spec](std::mt19937_64& rng, Eigen::Index count) {
      const std::uint64_t sub = rng();
      const SampleSet native = sample_wrapped_gaussian_so3(spec, count, sub);
      Eigen::MatrixXd x(count, 6);
      for (Eigen::Index i = 0; i < count; ++i)
        x.row(i) = embed::to_unit_sphere(row_to_rotation(native.points.row(i))).transpose();
      return x;
    };
  }
  throw ConfigError("unknown prior kind '" + opt.prior_kind + "'");
}

/// Fixed prior draw for sampling starts (seeded, thread-invariant).
Eigen::MatrixXd draw_prior_batch(const Options& opt, const Route& route, Eigen::Index count,
                                 std::uint64_t seed) {
  const PriorSampler prior = make_route_prior(opt, route);
  auto rng = make_stream(seed, 0x7072696f);
  return prior(rng, count);
}

std::string timestamp_utc() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  char buf[32];
  std::tm tm_utc{};
  gmtime_r(&t, &tm_utc);
  std::strftime(buf, sizeof buf, "%Y%m%d-%H%M%S", &tm_utc);
  const auto ns = std::chrono::duration_cast<std::chrono::nanoseconds>(
                      now.time_since_epoch()).count() % 1000000000;
  return std::string(buf) + "-" + std::to_string(ns);
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  out << text;
  if (!out) throw IoError("write failed: " + path.string());
}

void write_trace_csv(const fs::path& path, const TrainTrace& trace, bool with_score) {
  std::ostringstream out;
  out << (with_score ? "iteration,velocity_loss,score_loss\n" : "iteration,velocity_loss\n");
  char buf[40];
  for (std::size_t i = 0; i < trace.iteration.size(); ++i) {
    out << trace.iteration[i];
    std::snprintf(buf, sizeof buf, ",%.12g", trace.velocity_loss[i]);
    out << buf;
    if (with_score) {
      std::snprintf(buf, sizeof buf, ",%.12g", trace.score_loss[i]);
      out << buf;
    }
    out << "\n";
  }
  write_text(path, out.str());
}

std::vector<std::pair<std::string, std::string>> echo_fields(std::vector<Field>& fields) {
  std::vector<std::pair<std::string, std::string>> echo;
  for (auto& f : fields) echo.emplace_back(f.key, field_to_string(f));
  return echo;
}

}  // namespace

int main(int argc, char** argv) {
  Options o;
  std::vector<Field> fields = field_registry(o);

  CLI::App app{"geodesic-bridge generative modeling on the sphere and the rotation group"};
  app.set_version_flag("--version", std::string(kVersion));
  std::string config_path;
  app.add_option("--config", config_path, "sectioned key=value run configuration");
  for (auto& f : fields) {
    std::visit([&](auto* ptr) { app.add_option("--" + f.key, *ptr); }, f.ref);
  }
  app.get_option("--run.outdir")->envname("GEOBRIDGE_OUT");

  auto* cmd_datagen = app.add_subcommand("datagen", "synthesize or ingest sample sets");
  auto* cmd_train = app.add_subcommand("train", "fit velocity (and score) fields");
  auto* cmd_sample = app.add_subcommand("sample", "generate from trained fields");
  auto* cmd_eval = app.add_subcommand("eval", "compare generated against truth");
  auto* cmd_bench = app.add_subcommand("bench", "convergence-order benchmark");
  for (auto* cmd : {cmd_datagen, cmd_train, cmd_sample, cmd_eval, cmd_bench})
    cmd->fallthrough();
  app.require_subcommand(1);

  fs::path run_dir;
  try {
    // the config file seeds the defaults; command-line flags then override
    for (int i = 1; i + 1 < argc; ++i)
      if (std::string(argv[i]) == "--config") apply_config_file(argv[i + 1], fields);
    try {
      app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
      return app.exit(e);
    }

    const Route route = parse_route(o.route);
    const int threads = o.threads > 0 ? o.threads : default_threads();
    const std::string resolved = resolved_config_str(fields);

    std::string cmd_name;
    for (auto* cmd : {cmd_datagen, cmd_train, cmd_sample, cmd_eval, cmd_bench})
      if (cmd->parsed()) cmd_name = cmd->get_name();

    char hash8[16];
    std::snprintf(hash8, sizeof hash8, "%08llx",
                  static_cast<unsigned long long>(detail::fnv1a(resolved) & 0xffffffffULL));
    run_dir = fs::path(o.outdir) / (cmd_name + "-" + hash8 + "-" + timestamp_utc());
    fs::create_directories(run_dir);
    write_text(run_dir / "config.resolved", resolved);

    if (cmd_datagen->parsed()) {
      const SampleSet target = synthesize_target(o, route, threads);
      target.validate(1e-9);
      write_sample_csv(target, (run_dir / "target.csv").string());
      if (o.target_kind == "vmf" || o.target_kind == "wrapped") {
        const MixtureSpec spec = make_mixture(o, false);
        SampleSet centers;
        centers.kind = spec.kind;
        centers.points = spec.centers;
        centers.seed = o.target_seed;
        centers.source = "mixture centers";
        write_sample_csv(centers, (run_dir / "target_centers.csv").string());
      }
      std::cout << run_dir.string() << "\n";
      return 0;
    }

    if (cmd_train->parsed()) {
      SampleSet native;
      if (!o.data_csv.empty())
        native = o.target_kind == "latlon" ? ingest_latlon_csv(o.data_csv)
                                           : read_sample_csv(o.data_csv);
      else
        native = synthesize_target(o, route, threads);
      const Eigen::MatrixXd data = to_process(route, native);
      FieldNet velocity = make_field_net(route.process_dim, o.hidden, o.depth, o.time_freqs,
                                         activation_from_name(o.velocity_activation),
                                         mix64(o.seed ^ 0x76));
      FieldNet score;
      if (o.train_score)
        score = make_field_net(route.process_dim, o.hidden, o.depth, o.time_freqs,
                               Activation::Tanh, mix64(o.seed ^ 0x73));
      TrainConfig cfg;
      cfg.iterations = o.iterations;
      cfg.batch_size = o.batch;
      cfg.learning_rate = o.lr;
      cfg.weight_decay = o.weight_decay;
      cfg.lr_step = o.lr_step;
      cfg.lr_gamma = o.lr_gamma;
      cfg.seed = o.seed;
      cfg.eval_every = o.eval_every;
      const TrainTrace trace = train(velocity, o.train_score ? &score : nullptr,
                                     make_route_prior(o, route), data, cfg);
      save_checkpoint(velocity, (run_dir / "velocity.ckpt").string());
      if (o.train_score) save_checkpoint(score, (run_dir / "score.ckpt").string());
      write_trace_csv(run_dir / "loss_trace.csv", trace, o.train_score);
      std::cout << run_dir.string() << "\n";
      return 0;
    }

    if (cmd_sample->parsed()) {
      if (o.velocity_checkpoint.empty()) throw ConfigError("sample needs a velocity checkpoint");
      const FieldNet velocity = load_checkpoint(o.velocity_checkpoint);
      FieldNet score;
      const bool has_score = !o.score_checkpoint.empty();
      if (has_score) score = load_checkpoint(o.score_checkpoint);
      if (velocity.ambient_dim != route.process_dim)
        throw ConfigError("checkpoint dimension does not match the route");
      if (o.epsilon > 0 && !has_score)
        throw ConfigError("epsilon > 0 needs sample.score_checkpoint");

      SamplerConfig cfg;
      cfg.scheme = scheme_from_name(o.scheme);
      cfg.steps = o.steps;
      cfg.epsilon = o.epsilon;
      cfg.seed = mix64(o.seed ^ 0x73616d70);
      if (o.direction != "forward" && o.direction != "backward")
        throw ConfigError("direction must be forward or backward");
      cfg.direction = o.direction == "backward" ? Direction::Backward : Direction::Forward;

      Eigen::MatrixXd start;
      if (!o.start_csv.empty())
        start = to_process(route, read_sample_csv(o.start_csv));
      else if (cfg.direction == Direction::Forward)
        start = draw_prior_batch(o, route, o.sample_count, o.seed);
      else
        throw ConfigError("backward sampling needs sample.start");
      if (start.rows() > o.sample_count) start = start.topRows(o.sample_count);

      const Drift drift =
          make_perturbed_drift(velocity, has_score ? &score : nullptr, o.epsilon, cfg.direction);
      const SampleRun run = run_sampler(drift, start, cfg, threads);
      const SampleSet out_set = from_process(route, run.states, o.seed, "sampled:" + o.scheme);
      write_sample_csv(out_set, (run_dir / "samples.csv").string());

      if (o.record_trajectories) {
        const Eigen::Index limit = std::min<Eigen::Index>(o.record_limit, start.rows());
        const SampleRun rec = run_sampler(drift, start.topRows(limit), cfg, threads, true);
        for (Eigen::Index i = 0; i < limit; ++i) {
          std::ostringstream tr;
          tr << "t";
          for (int c = 0; c < route.process_dim; ++c) tr << ",c" << c;
          tr << "\n";
          char buf[40];
          for (Eigen::Index k = 0; k < rec.trajectories[i].times.size(); ++k) {
            std::snprintf(buf, sizeof buf, "%.12g", rec.trajectories[i].times(k));
            tr << buf;
            for (int c = 0; c < route.process_dim; ++c) {
              std::snprintf(buf, sizeof buf, ",%.17g", rec.trajectories[i].states(k, c));
              tr << buf;
            }
            tr << "\n";
          }
          write_text(run_dir / ("trajectory-" + std::to_string(i) + ".csv"), tr.str());
        }
      }

      std::string info;
      info += "scheme=" + scheme_name(cfg.scheme) + "\n";
      info += "degraded_to_ode=" + std::string(run.degraded_to_ode ? "true" : "false") + "\n";
      info += "grw_clamped=" + std::to_string(run.grw_clamped) + "\n";
      write_text(run_dir / "run_info.txt", info);
      std::cout << run_dir.string() << "\n";
      return 0;
    }

    if (cmd_eval->parsed()) {
      if (o.generated_csv.empty() || o.truth_csv.empty())
        throw ConfigError("eval needs eval.generated and eval.truth");
      const SampleSet gen = read_sample_csv(o.generated_csv);
      const SampleSet truth = read_sample_csv(o.truth_csv);
      MetricsReport report;
      report.seed = o.seed;
      report.n_a = gen.size();
      report.n_b = truth.size();
      report.w2 = w2_empirical(gen, truth, o.max_n, o.seed, threads);
      const KlEstimate kl = kl_knn(gen, truth, o.knn_k, threads);
      report.kl = kl.clipped;
      report.kl_raw = kl.raw;
      if (o.with_nll) {
        if (route.embedded) throw ConfigError("nll is available on the s2 route only");
        if (o.eval_velocity_checkpoint.empty())
          throw ConfigError("nll needs eval.velocity_checkpoint");
        const FieldNet velocity = load_checkpoint(o.eval_velocity_checkpoint);
        const Drift drift = make_perturbed_drift(velocity, nullptr, 0.0);
        const double log_u = log_density_uniform(ManifoldKind::Sphere, 3);
        const Eigen::VectorXd nll =
            nll_ode(drift, truth.points, [log_u](const Eigen::VectorXd&) { return log_u; },
                    o.nll_steps, threads);
        report.mean_nll = nll.mean();
      }
      report.config_echo = echo_fields(fields);
      write_metrics(report, (run_dir / "metrics.txt").string());
      std::cout << run_dir.string() << "\n";
      return 0;
    }

    if (cmd_bench->parsed()) {
      std::vector<Scheme> schemes;
      for (const auto& name : split_list(o.bench_schemes))
        schemes.push_back(scheme_from_name(name));
      std::vector<int> steps;
      for (const auto& s : split_list(o.bench_steps)) steps.push_back(std::stoi(s));
      const BenchResult bench =
          convergence_bench(schemes, o.bench_epsilon, steps, o.bench_paths,
                            mix64(o.seed ^ 0x62656e63), route.process_dim, threads,
                            o.bench_weak_paths);
      MetricsReport report;
      report.seed = o.seed;
      report.slopes = bench.slopes;
      report.config_echo = echo_fields(fields);
      write_metrics(report, (run_dir / "bench.txt").string());
      std::ostringstream err;
      err << "steps";
      for (const auto& [name, _] : bench.errors) err << "," << name;
      err << "\n";
      for (std::size_t lev = 0; lev < bench.steps.size(); ++lev) {
        err << bench.steps[lev];
        for (const auto& [_, errs] : bench.errors) err << "," << errs[lev];
        err << "\n";
      }
      write_text(run_dir / "bench_errors.csv", err.str());
      std::cout << run_dir.string() << "\n";
      return 0;
    }

    return 0;
  } catch (const Error& e) {
    if (!run_dir.empty()) {
      std::error_code ec;
      fs::remove_all(run_dir, ec);
    }
    std::cerr << e.tag() << ": " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    if (!run_dir.empty()) {
      std::error_code ec;
      fs::remove_all(run_dir, ec);
    }
    std::cerr << "Error: " << e.what() << "\n";
    return 1;
  }
}
