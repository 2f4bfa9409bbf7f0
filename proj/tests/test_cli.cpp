#include <catch2/catch_amalgamated.hpp>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace fs = std::filesystem;

namespace {

std::string cli_path() {
  const char* env = std::getenv("GEOBRIDGE_CLI");
  REQUIRE(env != nullptr);
  return env;
}

struct CmdResult {
  int exit_code;
  std::string out;
  std::string err;
};

CmdResult run_cmd(const std::string& args) {
  const std::string out_file = "cli_stdout.txt", err_file = "cli_stderr.txt";
  const std::string cmd = cli_path() + " " + args + " > " + out_file + " 2> " + err_file;
  const int rc = std::system(cmd.c_str());
  auto slurp = [](const std::string& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  };
  CmdResult r{WEXITSTATUS(rc), slurp(out_file), slurp(err_file)};
  std::remove(out_file.c_str());
  std::remove(err_file.c_str());
  return r;
}

std::string first_line(const std::string& s) {
  const auto nl = s.find('\n');
  return nl == std::string::npos ? s : s.substr(0, nl);
}

std::string slurp_file(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_config(const std::string& path, const std::string& extra) {
  std::ofstream f(path);
  f << "[run]\nroute=s2\nseed=5\noutdir=cli_runs\nthreads=1\n";
  f << "[target]\nkind=vmf\ncenters=4\nkappa=64\ncount=1500\nseed=2\n";
  f << "[train]\niterations=120\nbatch=128\nlr=0.003\nhidden=32\ndepth=2\neval_every=20\n";
  f << extra;
}

}  // namespace

TEST_CASE("full pipeline smoke run", "[cli][slow]") {
  const auto t0 = std::chrono::steady_clock::now();
  fs::remove_all("cli_runs");
  write_config("cli_test.cfg", "");

  const CmdResult datagen = run_cmd("datagen --config cli_test.cfg");
  INFO(datagen.err);
  REQUIRE(datagen.exit_code == 0);
  const fs::path data_dir = first_line(datagen.out);
  REQUIRE(fs::exists(data_dir / "target.csv"));
  REQUIRE(fs::exists(data_dir / "config.resolved"));

  const CmdResult train =
      run_cmd("train --config cli_test.cfg --train.data " + (data_dir / "target.csv").string());
  INFO(train.err);
  REQUIRE(train.exit_code == 0);
  const fs::path train_dir = first_line(train.out);
  REQUIRE(fs::exists(train_dir / "velocity.ckpt"));
  REQUIRE(fs::exists(train_dir / "score.ckpt"));
  REQUIRE(fs::exists(train_dir / "loss_trace.csv"));

  const std::string ckpt = (train_dir / "velocity.ckpt").string();
  const std::string score = (train_dir / "score.ckpt").string();
  const CmdResult sample = run_cmd("sample --config cli_test.cfg --sample.scheme ode-rk4 "
                                   "--sample.steps 20 --sample.count 512 "
                                   "--sample.velocity_checkpoint " + ckpt);
  INFO(sample.err);
  REQUIRE(sample.exit_code == 0);
  const fs::path sample_dir = first_line(sample.out);
  REQUIRE(fs::exists(sample_dir / "samples.csv"));

  const CmdResult eval = run_cmd("eval --config cli_test.cfg --eval.generated " +
                                 (sample_dir / "samples.csv").string() + " --eval.truth " +
                                 (data_dir / "target.csv").string() +
                                 " --eval.max_n 256 --eval.nll true "
                                 "--eval.velocity_checkpoint " + ckpt +
                                 " --eval.nll_steps 16");
  INFO(eval.err);
  REQUIRE(eval.exit_code == 0);
  const fs::path eval_dir = first_line(eval.out);
  const std::string metrics = slurp_file(eval_dir / "metrics.txt");
  CHECK(metrics.find("w2=") != std::string::npos);
  CHECK(metrics.find("kl=") != std::string::npos);
  CHECK(metrics.find("mean_nll=") != std::string::npos);
  CHECK(metrics.find("config.run.route=s2") != std::string::npos);

  const CmdResult bench = run_cmd("bench --config cli_test.cfg --bench.schemes esde-em,grw "
                                  "--bench.steps 4,8,16,32 --bench.paths 10000 "
                                  "--bench.weak_paths 20000 --bench.epsilon 1.0");
  INFO(bench.err);
  REQUIRE(bench.exit_code == 0);
  const fs::path bench_dir = first_line(bench.out);
  const std::string bench_txt = slurp_file(bench_dir / "bench.txt");
  CHECK(bench_txt.find("slope.esde-em=") != std::string::npos);
  CHECK(bench_txt.find("slope.grw=") != std::string::npos);

  // eval of a set against itself: w2 = 0
  const CmdResult self = run_cmd("eval --config cli_test.cfg --eval.generated " +
                                 (data_dir / "target.csv").string() + " --eval.truth " +
                                 (data_dir / "target.csv").string() + " --eval.max_n 128");
  REQUIRE(self.exit_code == 1);  // kl degenerates on identical arrays
  CHECK(first_line(self.err).rfind("DegeneracyError", 0) == 0);

  const auto elapsed =
      std::chrono::duration_cast<std::chrono::seconds>(std::chrono::steady_clock::now() - t0);
  CHECK(elapsed.count() < 60);

  std::remove("cli_test.cfg");
  fs::remove_all("cli_runs");
}

TEST_CASE("grw with zero epsilon degrades to the ode output", "[cli]") {
  fs::remove_all("cli_runs2");
  write_config("cli_test2.cfg", "[sample]\nscheme=grw\nepsilon=0\nsteps=16\ncount=256\n");

  const CmdResult train = run_cmd("train --config cli_test2.cfg --run.outdir cli_runs2 "
                                  "--train.iterations 40 --train.score false");
  INFO(train.err);
  REQUIRE(train.exit_code == 0);
  const std::string ckpt = (fs::path(first_line(train.out)) / "velocity.ckpt").string();

  const CmdResult grw = run_cmd("sample --config cli_test2.cfg --run.outdir cli_runs2 "
                                "--sample.velocity_checkpoint " + ckpt);
  REQUIRE(grw.exit_code == 0);
  const fs::path grw_dir = first_line(grw.out);
  const std::string info = slurp_file(grw_dir / "run_info.txt");
  CHECK(info.find("degraded_to_ode=true") != std::string::npos);

  const CmdResult ode = run_cmd("sample --config cli_test2.cfg --run.outdir cli_runs2 "
                                "--sample.scheme ode-euler --sample.velocity_checkpoint " + ckpt);
  REQUIRE(ode.exit_code == 0);
  const fs::path ode_dir = first_line(ode.out);
  CHECK(slurp_file(grw_dir / "samples.csv") == slurp_file(ode_dir / "samples.csv"));

  std::remove("cli_test2.cfg");
  fs::remove_all("cli_runs2");
}

TEST_CASE("identical config and seed reproduce identical outputs", "[cli]") {
  fs::remove_all("cli_runs3");
  write_config("cli_test3.cfg", "");
  const CmdResult a = run_cmd("datagen --config cli_test3.cfg --run.outdir cli_runs3");
  const CmdResult b = run_cmd("datagen --config cli_test3.cfg --run.outdir cli_runs3");
  REQUIRE(a.exit_code == 0);
  REQUIRE(b.exit_code == 0);
  const fs::path da = first_line(a.out), db = first_line(b.out);
  CHECK(da != db);  // fresh run directory each time
  CHECK(slurp_file(da / "target.csv") == slurp_file(db / "target.csv"));
  CHECK(slurp_file(da / "config.resolved") == slurp_file(db / "config.resolved"));

  // a resolved config re-runs to the same outputs
  const CmdResult c = run_cmd("datagen --config " + (da / "config.resolved").string() +
                              " --run.outdir cli_runs3");
  INFO(c.err);
  REQUIRE(c.exit_code == 0);
  CHECK(slurp_file(fs::path(first_line(c.out)) / "target.csv") == slurp_file(da / "target.csv"));

  std::remove("cli_test3.cfg");
  fs::remove_all("cli_runs3");
}

TEST_CASE("failures exit 1 with a machine-parsable class and clean up", "[cli]") {
  fs::remove_all("cli_runs4");
  write_config("cli_test4.cfg", "");
  const CmdResult r = run_cmd("sample --config cli_test4.cfg --run.outdir cli_runs4");
  CHECK(r.exit_code == 1);
  CHECK(first_line(r.err).rfind("ConfigError:", 0) == 0);
  // the partially created run directory was removed
  std::size_t leftovers = 0;
  if (fs::exists("cli_runs4"))
    for (auto& entry : fs::directory_iterator("cli_runs4")) leftovers += 1, (void)entry;
  CHECK(leftovers == 0);

  const CmdResult bad = run_cmd("train --config cli_test4.cfg --run.route moebius");
  CHECK(bad.exit_code == 1);
  CHECK(first_line(bad.err).rfind("ConfigError:", 0) == 0);

  std::remove("cli_test4.cfg");
  fs::remove_all("cli_runs4");
}
