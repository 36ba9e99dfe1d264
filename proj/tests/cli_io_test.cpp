#include <gtest/gtest.h>

#include <sstream>

#include "phm/commands.hpp"
#include "test_util.hpp"

using namespace phm;
namespace fs = std::filesystem;

namespace {

class TempDir {
 public:
  TempDir() {
    static int counter = 0;
    path_ = fs::temp_directory_path() / ("phm-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& s) const { return path_ / s; }

 private:
  fs::path path_;
};

std::string small_config(const fs::path& out, const std::string& initial, const std::string& extra = "") {
  return "[grid]\nnx = 8\nny = 8\nnz = 8\n[time]\ndt = 0.01\nt_end = 0.1\n[initial]\n" + initial +
         "\n[output]\ndirectory = " + out.string() + "\n" + extra;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

void spill(const fs::path& p, const std::string& s) { std::ofstream(p, std::ios::binary) << s; }

std::string config_error(const std::string& text) {
  try {
    parse_config_text(text, "cfg");
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

const char* full_config = R"(; every section
[grid]
L = 1
nx = 16
ny = 12
nz = 8
[model]
U0 = 0.75
[time]
cfl_safety = 0.4   ; instead of dt
t_end = 0.5
output_stride = 5
cfl_policy = error
[initial]
kind = mean_profile
amplitude = 0.2
cutoff = 2
mean_amplitude = 0.1
seed = 42
[picard]
max_iters = 12
tol = 1e-9
interpolation = cubic
[constants]
C0 = 2.5
C3 = 0.5
[output]
directory = out dir
snapshot_stride = 10
)";

}  // namespace

TEST(Config, ParsesEverySection) {
  const auto c = parse_config_text(full_config);
  EXPECT_EQ(c.grid, (GridSpec{1.0, 16, 12, 8}));
  EXPECT_EQ(c.model.U0, 0.75);
  EXPECT_EQ(c.model.L, 1.0);
  EXPECT_FALSE(c.time.dt);
  EXPECT_EQ(*c.time.cfl_safety, 0.4);
  EXPECT_EQ(c.time.output_stride, 5u);
  EXPECT_EQ(c.time.cfl_policy, CflPolicy::error);
  EXPECT_EQ(c.kind, InitialKind::mean_profile);
  EXPECT_EQ(c.initial.seed, 42u);
  ASSERT_TRUE(c.picard);
  EXPECT_EQ(c.picard->interpolation, TimeInterpolation::cubic);
  EXPECT_EQ(*c.constants.C0, 2.5);
  EXPECT_EQ(c.constants.C1, 1.0);
  EXPECT_EQ(c.output.directory, "out dir");
  EXPECT_EQ(c.output.snapshot_stride, 10u);
}

TEST(Config, CanonicalFormRoundTrips) {
  const auto c = parse_config_text(full_config);
  const auto text = to_ini(c);
  EXPECT_EQ(parse_config_text(text), c);
  EXPECT_EQ(to_ini(parse_config_text(text)), text);
  auto d = c;
  d.time.cfl_safety.reset();
  d.time.dt = 0.1 / 3;  // needs all 17 digits
  d.time.t_end = 0.1;
  d.model.U0 = 1.0 / 7;
  EXPECT_EQ(parse_config_text(to_ini(d)), d);
}

TEST(Config, Defaults) {
  const auto c = parse_config_text("[grid]\nnx = 4\nny = 4\nnz = 4\n[time]\ndt = 0.5\nt_end = 1\n[initial]\nkind = vertical_wave\n");
  EXPECT_EQ(c.grid.L, 1.0);
  EXPECT_EQ(c.model.U0, 1.0);
  EXPECT_EQ(c.time.output_stride, 1u);
  EXPECT_EQ(c.time.cfl_policy, CflPolicy::warn);
  EXPECT_FALSE(c.picard);
  EXPECT_EQ(c.output.snapshot_stride, 0u);
}

TEST(Config, RejectsWithContext) {
  const std::string base = "[grid]\nnx = 8\nny = 8\nnz = 8\n[time]\ndt = 0.1\nt_end = 1\n[initial]\nkind = random_bandlimited\nseed = 1\n";
  EXPECT_NE(config_error("[grid]\nnx = 2\nny = 8\nnz = 8\n[time]\ndt = 0.1\nt_end = 1\n[initial]\nkind = vertical_wave\n").find("nx"),
            std::string::npos);
  EXPECT_NE(config_error("[grid]\nnx 8\n").find("line 2"), std::string::npos);
  EXPECT_NE(config_error(base + "[mystery]\na = 1\n").find("mystery"), std::string::npos);
  EXPECT_NE(config_error(base + "[output]\ncolour = red\n").find("colour"), std::string::npos);
  EXPECT_NE(config_error(base + "[picard]\ninterpolation = spline\n").find("interpolation"), std::string::npos);
  EXPECT_NE(config_error("[grid]\nnx = 8\nny = 8\nnz = eight\n").find("nz"), std::string::npos);
  EXPECT_NE(config_error("[grid]\nnx = 8\nny = 8\nnz = 8\n[time]\ndt = 0.1\nt_end = 1\n[initial]\nkind = random_bandlimited\n")
                .find("seed"),
            std::string::npos);
  auto both = base;
  both.replace(both.find("dt = 0.1"), 8, "dt = 0.1\ncfl_safety = 0.5");
  EXPECT_NE(config_error(both).find("exactly one"), std::string::npos);
  auto no_t = base;
  no_t.replace(no_t.find("t_end = 1"), 9, "");
  EXPECT_NE(config_error(no_t).find("t_end"), std::string::npos);
  EXPECT_THROW(load_config("/nonexistent/phm.ini"), ConfigError);
}

TEST(Config, TimeGridFromDtAndCfl) {
  auto c = parse_config_text("[grid]\nnx = 8\nny = 8\nnz = 8\n[time]\ndt = 0.1\nt_end = 1\n[initial]\nkind = vertical_wave\n");
  EXPECT_EQ(c.time_grid(c.initial_state()).nsteps, 10u);
  c.time.dt = 0.3;
  EXPECT_THROW(c.time_grid(c.initial_state()), ConfigError);
  c.time.dt.reset();
  c.time.cfl_safety = 0.5;
  // bound = 0.5 * dz / U0 = 1/16; t_end = 1 in 16 steps
  const auto tg = c.time_grid(c.initial_state());
  EXPECT_EQ(tg.nsteps, 16u);
  EXPECT_DOUBLE_EQ(tg.horizon(), 1.0);
}

TEST(Snapshot, RoundTripIsBitExact) {
  TempDir tmp;
  const GridSpec g{2.0, 4, 6, 8};
  auto f = test::noise_field(g, 3);
  f[0] = -0.0;
  f[1] = std::numeric_limits<double>::denorm_min();
  f[2] = std::numeric_limits<double>::max();
  f[3] = M_PI;
  SnapshotHeader h;
  h.model = ModelParams{2.0, 0.3};
  h.time = 0.125;
  h.variable = "eta";
  write_snapshot(tmp / "a.bin", f, h);
  const auto s = read_snapshot(tmp / "a.bin");
  EXPECT_EQ(s.header.grid, g);
  EXPECT_EQ(s.header.model.U0, 0.3);
  EXPECT_EQ(s.header.time, 0.125);
  EXPECT_EQ(s.header.variable, "eta");
  for (std::size_t i = 0; i < f.size(); ++i) EXPECT_EQ(std::bit_cast<std::uint64_t>(s.field[i]), std::bit_cast<std::uint64_t>(f[i]));
  // header line plus exactly 8 bytes per value
  const auto bytes = slurp(tmp / "a.bin");
  EXPECT_EQ(bytes.size(), bytes.find('\n') + 1 + 8 * f.size());
  // payload is little-endian
  double first;
  std::uint64_t raw = 0;
  for (int b = 7; b >= 0; --b) raw = (raw << 8) | std::uint8_t(bytes[bytes.find('\n') + 1 + b]);
  first = std::bit_cast<double>(raw);
  EXPECT_EQ(std::bit_cast<std::uint64_t>(first), std::bit_cast<std::uint64_t>(-0.0));
  write_snapshot(tmp / "b.bin", s.field, s.header);
  EXPECT_EQ(slurp(tmp / "b.bin"), bytes);
}

TEST(Snapshot, RejectsDamagedFiles) {
  TempDir tmp;
  const GridSpec g{1.0, 4, 4, 4};
  write_snapshot(tmp / "ok.bin", test::noise_field(g, 1), {});
  const auto good = slurp(tmp / "ok.bin");
  auto expect_reject = [&](const std::string& content, const std::string& needle) {
    spill(tmp / "bad.bin", content);
    try {
      read_snapshot(tmp / "bad.bin");
      ADD_FAILURE() << "accepted: expected '" << needle << "'";
    } catch (const SnapshotError& e) {
      EXPECT_NE(std::string(e.what()).find(needle), std::string::npos) << e.what();
    }
  };
  expect_reject(good.substr(0, good.size() - 1), "size mismatch");
  expect_reject(good + "x", "size mismatch");
  auto swap = [&](const std::string& from, const std::string& to) {
    auto s = good;
    s.replace(s.find(from), from.size(), to);
    return s;
  };
  expect_reject(swap("\"byte_order\":\"little\"", "\"byte_order\":\"big\""), "byte order");
  expect_reject(swap("\"version\":1", "\"version\":2"), "version");
  expect_reject(swap("\"dtype\":\"float64\"", "\"dtype\":\"float32\""), "element type");
  expect_reject(swap("\"variable\":\"theta\"", "\"variable\":\"rho\""), "variable");
  expect_reject(swap("\"nx\":4", "\"nx\":3"), "grid");
  expect_reject(swap("phm-snapshot", "xyz-snapshot"), "not a phm snapshot");
  expect_reject("garbage\n", "JSON");
  expect_reject("", "header");
  EXPECT_THROW(read_snapshot(tmp / "missing.bin"), SnapshotError);
  EXPECT_THROW(write_snapshot(tmp / "v.bin", test::noise_field(g, 1), SnapshotHeader{.variable = "rho"}), SnapshotError);
}

TEST(ExitCodes, Mapping) {
  EXPECT_EQ(cli::exit_code_for(ConfigError("x")), 2);
  EXPECT_EQ(cli::exit_code_for(SnapshotError("x")), 2);
  EXPECT_EQ(cli::exit_code_for(GridMismatch("x")), 2);
  EXPECT_EQ(cli::exit_code_for(NumericalAbort("x", 3)), 3);
  EXPECT_EQ(cli::exit_code_for(std::runtime_error("x")), 1);
}

TEST(RunSimulate, WritesDiagnosticsSnapshotsAndSummary) {
  TempDir tmp;
  const auto c = parse_config_text(small_config(tmp / "run", "kind = eigen_steady\namplitude = 0.5",
                                                "snapshot_stride = 4\n"));
  std::ostringstream log;
  ASSERT_EQ(cli::run_simulate(c, log), 0);
  std::ifstream csv(tmp / "run" / "diagnostics.csv");
  std::string line;
  std::getline(csv, line);
  EXPECT_EQ(line.substr(0, 7), "step,t,");
  int rows = 0;
  while (std::getline(csv, line)) ++rows;
  EXPECT_EQ(rows, 11);
  for (int step : {0, 4, 8, 10}) {
    const auto s = read_snapshot(tmp / "run" / cli::snapshot_name(step, "theta"));
    EXPECT_NEAR(s.header.time, 0.01 * step, 1e-15);
    EXPECT_TRUE(fs::exists(tmp / "run" / cli::snapshot_name(step, "eta")));
  }
  EXPECT_FALSE(fs::exists(tmp / "run" / cli::snapshot_name(2, "theta")));
  const auto summary = nlohmann::json::parse(slurp(tmp / "run" / "summary.json"));
  EXPECT_EQ(summary["status"], "ok");
  EXPECT_EQ(summary["steps"], 10);
  EXPECT_LE(summary["max_drift"]["energy"].get<double>(), 1e-10);
  EXPECT_EQ(parse_config_text(summary["config"].get<std::string>()), c);
}

TEST(RunSimulate, RepeatedRunsAreByteIdentical) {
  TempDir tmp;
  const std::string init = "kind = random_bandlimited\namplitude = 0.3\ncutoff = 2\nseed = 9";
  const auto a = parse_config_text(small_config(tmp / "a", init, "snapshot_stride = 5\n"));
  const auto b = parse_config_text(small_config(tmp / "b", init, "snapshot_stride = 5\n"));
  std::ostringstream log;
  ASSERT_EQ(cli::run_simulate(a, log), 0);
  ASSERT_EQ(cli::run_simulate(b, log), 0);
  int compared = 0;
  for (const auto& e : fs::directory_iterator(tmp / "a")) {
    const auto name = e.path().filename().string();
    if (name == "summary.json") continue;  // wall time differs
    EXPECT_EQ(slurp(e.path()), slurp(tmp / "b" / name)) << name;
    ++compared;
  }
  EXPECT_EQ(compared, 1 + 2 * 3);
}

TEST(RunSimulate, BlowUpExitsWithNumericalCode) {
  TempDir tmp;
  // far beyond the CFL bound with a warn policy: RK4 overflows within a few steps
  auto c = parse_config_text(small_config(tmp / "run", "kind = random_bandlimited\namplitude = 1e6\ncutoff = 2\nseed = 1"));
  c.time.dt = 1.0;
  c.time.t_end = 200.0;
  std::ostringstream log;
  EXPECT_EQ(cli::run_simulate(c, log), 3);
  const auto summary = nlohmann::json::parse(slurp(tmp / "run" / "summary.json"));
  EXPECT_EQ(summary["status"], "numerical_abort");
  EXPECT_GT(summary["failed_step"].get<int>(), 0);
  EXPECT_NE(log.str().find("non-finite"), std::string::npos);
}

TEST(RunSimulate, UnwritableOutputIsConfigError) {
  TempDir tmp;
  spill(tmp / "file", "x");
  const auto c = parse_config_text(small_config(tmp / "file" / "sub", "kind = vertical_wave"));
  EXPECT_THROW(cli::run_simulate(c), ConfigError);
}

TEST(RunPicard, VerticalWaveConverges) {
  TempDir tmp;
  const auto c = parse_config_text(small_config(tmp / "pic", "kind = vertical_wave\namplitude = 1", "[picard]\ntol = 1e-12\n"));
  std::ostringstream log;
  ASSERT_EQ(cli::run_picard(c, log), 0);
  const auto j = nlohmann::json::parse(slurp(tmp / "pic" / "picard_report.json"));
  EXPECT_TRUE(j["report"]["converged"].get<bool>());
  EXPECT_LE(j["report"]["distance_to_nonlinear"].get<double>(), 1e-12);
  EXPECT_EQ(j["report"]["iterations"], 2);
  EXPECT_TRUE(fs::exists(tmp / "pic" / cli::snapshot_name(10, "theta")));
}

TEST(RunPicard, NonConvergenceAndMissingSection) {
  TempDir tmp;
  const std::string init = "kind = random_bandlimited\namplitude = 0.3\ncutoff = 2\nseed = 2";
  auto c = parse_config_text(small_config(tmp / "pic", init, "[picard]\nmax_iters = 2\ntol = 0\n"));
  std::ostringstream log;
  EXPECT_EQ(cli::run_picard(c, log), 4);
  const auto j = nlohmann::json::parse(slurp(tmp / "pic" / "picard_report.json"));
  EXPECT_FALSE(j["report"]["converged"].get<bool>());
  EXPECT_TRUE(j["contraction"].is_null());
  c.picard.reset();
  EXPECT_THROW(cli::run_picard(c, log), ConfigError);
}

TEST(RunMollify, KeepsHeaderAndRejectsBadEpsilon) {
  TempDir tmp;
  const GridSpec g{1.0, 16, 16, 16};
  SnapshotHeader h;
  h.time = 0.5;
  h.variable = "eta";
  const auto f = test::random_field(g, 4, 5);
  write_snapshot(tmp / "in.bin", f, h);
  ASSERT_EQ(cli::run_mollify((tmp / "in.bin").string(), (tmp / "out.bin").string(), 0.125), 0);
  const auto s = read_snapshot(tmp / "out.bin");
  EXPECT_EQ(s.header.variable, "eta");
  EXPECT_EQ(s.header.time, 0.5);
  EXPECT_LE(test::max_abs_diff(s.field, mollify(f, Mollifier(0.125))), 0.0);
  EXPECT_THROW(cli::run_mollify((tmp / "in.bin").string(), (tmp / "o2.bin").string(), 0.5), ConfigError);
  EXPECT_THROW(cli::run_mollify((tmp / "nope.bin").string(), (tmp / "o2.bin").string(), 0.1), SnapshotError);
}
