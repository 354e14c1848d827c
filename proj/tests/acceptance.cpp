// Acceptance run: one PASS/FAIL line per criterion. Criteria 7-9 drive the
// command-line tool end to end; the rest call the library directly.

#include "foldpath/io.hpp"
#include "foldpath/matching.hpp"
#include "foldpath/metrics.hpp"
#include "foldpath/neural_field.hpp"

#include "oracles.hpp"

#include <sys/wait.h>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

using namespace foldpath;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

fs::path g_workdir;

int run_cli(const std::string& args) {
  const std::string cmd = std::string("\"") + FOLDPATH_CLI + "\" " + args + " > \"" +
                          (g_workdir / "cli.log").string() + "\" 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string at(const std::string& name) { return (g_workdir / name).string(); }

std::string read_bytes(const std::string& file) {
  std::ifstream in(file, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::string fmt(const char* format, double a, double b = 0.0, double c = 0.0, double d = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, format, a, b, c, d);
  return buf;
}

Outcome dtw_oracle() {
  std::mt19937_64 rng(1);
  std::uniform_int_distribution<std::size_t> len(1, 6);
  const auto start = Clock::now();
  int mismatches = 0;
  for (int k = 0; k < 500; ++k) {
    const auto a = oracle::random_points(rng, len(rng));
    const auto b = oracle::random_points(rng, len(rng));
    if (dtw_align(a, b).cost != oracle::brute_force_dtw(a, b)) ++mismatches;
  }
  const double t = seconds_since(start);
  return {mismatches == 0 && t < 10.0, fmt("%.0f/500 exact, %.2f s", 500 - mismatches, t)};
}

Outcome hungarian_oracle() {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const auto start = Clock::now();
  int mismatches = 0;
  for (int k = 0; k < 200; ++k) {
    const Eigen::Index n = 1 + k % 7;
    Matrix m(n, n);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = u(rng);
    const auto expected = oracle::brute_force_assignment(m);
    const auto got = hungarian(m);
    double cost = 0.0;
    for (std::size_t i = 0; i < got.permutation.size(); ++i)
      cost += m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(got.permutation[i]));
    // Same summation order as the oracle, so equality is exact.
    if (cost != expected.cost) ++mismatches;
  }
  const double t = seconds_since(start);
  return {mismatches == 0 && t < 10.0, fmt("%.0f/200 exact, %.2f s", 200 - mismatches, t)};
}

Outcome gradient_check() {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g(0.0, 1.0);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  double worst = 0.0;
  std::size_t checked = 0;
  int configs = 0;
  for (std::uint64_t seed = 0; seed < 24; ++seed) {
    HeadConfig c;
    c.layers = 1 + seed % 3;
    c.hidden = 2 + (seed * 5) % 7;
    c.codeword = 1 + (seed / 2) % 4;
    c.conf_hidden = 3;
    c.activation = static_cast<Activation>(seed % 3);
    c.conditioning = (seed / 3) % 2 == 0 ? Conditioning::modulation : Conditioning::concat;
    c.omega0 = seed % 2 == 0 ? 30.0 : 5.0;
    c.seed = seed;
    HeadParams p = init_head(c);
    Vector cw(static_cast<Eigen::Index>(c.codeword));
    for (Eigen::Index k = 0; k < cw.size(); ++k) cw(k) = 0.5 * g(rng);
    std::vector<double> xs(3);
    for (double& x : xs) x = u(rng);
    Matrix up(3, 6);
    for (Eigen::Index k = 0; k < up.size(); ++k) up.data()[k] = g(rng);
    const double d_logit = g(rng);

    Gradients grads = head_backward(p, cw, xs, up);
    confidence_backward(p, cw, d_logit, grads);
    auto loss = [&] {
      double s = d_logit * oracle::reference_logit(p, cw);
      for (std::size_t t = 0; t < xs.size(); ++t) {
        const auto out = oracle::reference_head(p, cw, xs[t]);
        for (int k = 0; k < 6; ++k) s += up(static_cast<Eigen::Index>(t), k) * out[static_cast<std::size_t>(k)];
      }
      return s;
    };
    auto params = tensors(p);
    const auto analytic = tensors(std::as_const(grads.head));
    for (std::size_t t = 0; t < params.size(); ++t) {
      for (std::size_t k = 0; k < params[t].size(); ++k) {
        const double numeric = oracle::central_difference(loss, &params[t][k], 1e-5);
        worst = std::max(worst, oracle::relative_error(analytic[t][k], numeric, 1e-4));
        ++checked;
      }
    }
    for (Eigen::Index k = 0; k < cw.size(); ++k) {
      const double numeric = oracle::central_difference(loss, &cw(k), 1e-5);
      worst = std::max(worst, oracle::relative_error(grads.codeword(k), numeric, 1e-4));
      ++checked;
    }
    ++configs;
  }
  return {configs >= 20 && worst < 1e-4,
          fmt("%.0f configs, %.0f gradients, worst relative error %.2e", configs, static_cast<double>(checked), worst)};
}

Dataset fixture() {
  const std::string file = at("metric_fixture.json");
  if (run_cli("gen --strokes 4 --waypoints 20 --seed 0 --objects 3 --out " + file) != 0) {
    throw std::runtime_error("gen failed");
  }
  return load_dataset(file);
}

// Every prediction is a copy of a ground-truth path moved `offset` along the
// face normal (the pose orientation), which keeps it `offset` away from all
// ground truth of its planar object.
Dataset as_predictions(const Dataset& gt, double offset) {
  Dataset out = gt;
  for (auto& o : out) {
    o.predictions.clear();
    for (const auto& p : o.gt_paths) {
      Path q = p;
      for (auto& pose : q.poses) pose.position += offset * pose.orientation;
      o.predictions.push_back({q, 0.9});
    }
    o.gt_paths.clear();
  }
  return out;
}

Outcome metric_bounds(const Dataset& gt) {
  const Thresholds thr;
  const auto exact = evaluate(make_eval_set(gt, as_predictions(gt, 0.0)), thr);
  const auto moved = evaluate(make_eval_set(gt, as_predictions(gt, 10 * thr.delta)), thr);
  const bool ceiling = exact.ap50 == 1.0 && exact.ap == 1.0 && exact.ap_easy == 1.0 && exact.pcd == 0.0;
  const bool floor = moved.ap50 == 0.0 && moved.ap == 0.0 && moved.ap_easy == 0.0;
  return {ceiling && floor, fmt("exact: APs %.3f/%.3f/%.3f PCD %.3g", exact.ap50, exact.ap, exact.ap_easy, exact.pcd) +
                                fmt("; shifted 10 delta: APs %.3f/%.3f/%.3f", moved.ap50, moved.ap, moved.ap_easy)};
}

Outcome reversal(const Dataset& gt) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> noise(0.0, 0.01);
  std::uniform_int_distribution<std::size_t> len(2, 40);
  int changed = 0;
  for (int k = 0; k < 100; ++k) {
    Path a, b;
    const std::size_t ka = len(rng), kb = len(rng);
    for (std::size_t t = 0; t < ka; ++t) {
      Pose6D q;
      q.position = Vec3(0.02 * static_cast<double>(t), noise(rng), noise(rng));
      q.orientation = Vec3(noise(rng), noise(rng), 1.0).normalized();
      a.poses.push_back(q);
    }
    for (std::size_t t = 0; t < kb; ++t) {
      Pose6D q;
      q.position = Vec3(0.02 * static_cast<double>(t) * static_cast<double>(ka) / static_cast<double>(kb),
                        noise(rng), noise(rng));
      q.orientation = Vec3(noise(rng), noise(rng), 1.0).normalized();
      b.poses.push_back(q);
    }
    if (fscore_bidirectional(a, b).fscore != fscore_bidirectional(a, reverse(b)).fscore) ++changed;
  }

  // Noisy, partially wrong predictions so the APs are not trivially 0 or 1.
  Dataset pred = as_predictions(gt, 0.0);
  std::uniform_real_distribution<double> conf(0.0, 1.0);
  std::normal_distribution<double> wobble(0.0, 0.012);
  for (auto& o : pred) {
    for (auto& p : o.predictions) {
      for (auto& q : p.path.poses) q.position += Vec3(wobble(rng), wobble(rng), wobble(rng));
      p.confidence = conf(rng);
    }
  }
  Dataset flipped = pred;
  for (auto& o : flipped)
    for (auto& p : o.predictions) p.path = reverse(p.path);
  const auto r1 = evaluate(make_eval_set(gt, pred), {});
  const auto r2 = evaluate(make_eval_set(gt, flipped), {});
  const bool ap_same = r1.ap50 == r2.ap50 && r1.ap == r2.ap && r1.ap_easy == r2.ap_easy;
  return {changed == 0 && ap_same,
          fmt("%.0f/100 pairs unchanged; APs %.4f/%.4f/%.4f", 100 - changed, r1.ap50, r1.ap, r1.ap_easy) +
              (ap_same ? " identical after reversal" : fmt(" vs %.4f/%.4f/%.4f", r2.ap50, r2.ap, r2.ap_easy))};
}

Outcome hand_ap() {
  Path gt, miss;
  for (int k = 0; k < 10; ++k) {
    Pose6D q;
    q.position = Vec3(0.01 * k, 0, 0);
    gt.poses.push_back(q);
    q.position.y() = 1.0;
    miss.poses.push_back(q);
  }
  EvalSet a, b, c;
  a["o"] = {{gt}, {{gt, 1.0}}};
  b["o"] = {{gt}, {{gt, 0.9}, {miss, 0.1}}};
  c["o"] = {{gt}, {{miss, 0.9}, {gt, 0.1}}};
  const double va = average_precision(a, 0.5), vb = average_precision(b, 0.5), vc = average_precision(c, 0.5);
  return {va == 1.0 && vb == 1.0 && vc == 0.5, fmt("AP = %.17g, %.17g, %.17g", va, vb, vc)};
}

struct EndToEnd {
  std::string checkpoint, report;
  double seconds = 0.0;
  EvalReport metrics;
  std::size_t retained = 0, gt_paths = 0;
  double first_loss = 0.0, last_loss = 0.0;
};

std::string config(const char* name) { return (fs::path(FOLDPATH_SOURCE_DIR) / "configs" / name).string(); }

EndToEnd end_to_end(const std::string& tag, const std::string& gen_flags, const char* config_name) {
  EndToEnd e;
  e.checkpoint = at(tag + "_checkpoint.json");
  e.report = at(tag + "_report.json");
  const std::string data = at(tag + "_data.json"), pred = at(tag + "_pred.json");
  const auto start = Clock::now();
  auto step = [&](const std::string& args) {
    const int code = run_cli(args);
    if (code != 0) throw std::runtime_error("'" + args + "' exited with " + std::to_string(code));
  };
  step("gen --strokes 4 --waypoints 20 --seed 0 --objects 3 " + gen_flags + " --out " + data);
  step("fit --dataset " + data + " --config " + config(config_name) + " --checkpoint " + e.checkpoint);
  step("predict --checkpoint " + e.checkpoint + " --samples 128 --out " + pred);
  step("evaluate --gt " + data + " --pred " + pred + " --delta 0.025 --theta 10 --out " + e.report);
  e.seconds = seconds_since(start);

  const Dataset gt = load_dataset(data), predicted = load_dataset(pred);
  e.metrics = evaluate(make_eval_set(gt, predicted), {});
  for (const auto& o : gt) e.gt_paths += o.gt_paths.size();
  for (const auto& o : predicted) e.retained += o.predictions.size();
  const Checkpoint ck = load_checkpoint(e.checkpoint);
  const auto& h = ck.state.history;
  const std::size_t window = std::min<std::size_t>(h.size(), 30);
  for (std::size_t k = 0; k < window; ++k) {
    e.first_loss += h[k].total / static_cast<double>(window);
    e.last_loss += h[h.size() - 1 - k].total / static_cast<double>(window);
  }
  return e;
}

double max_second_difference(const std::string& tag) {
  double worst = 0.0;
  for (const auto& o : load_dataset(at(tag + "_pred.json"))) {
    for (const auto& p : o.predictions) {
      for (std::size_t t = 1; t + 1 < p.path.size(); ++t) {
        const Vec3 d2 = p.path.poses[t + 1].position - 2.0 * p.path.poses[t].position + p.path.poses[t - 1].position;
        worst = std::max(worst, d2.norm());
      }
    }
  }
  return worst;
}

void report(int id, const char* name, const std::function<Outcome()>& check, bool& all) {
  Outcome o;
  try {
    o = check();
  } catch (const std::exception& e) {
    o = {false, std::string("error: ") + e.what()};
  }
  all = all && o.pass;
  std::printf("%s %d %s: %s\n", o.pass ? "PASS" : "FAIL", id, name, o.detail.c_str());
  std::fflush(stdout);
}

}  // namespace

int main(int argc, char** argv) {
  g_workdir = fs::temp_directory_path() / "foldpath_acceptance";
  for (int k = 1; k + 1 < argc; ++k) {
    if (std::string(argv[k]) == "--workdir") g_workdir = argv[k + 1];
  }
  fs::create_directories(g_workdir);

  bool all = true;
  report(1, "dtw-oracle", dtw_oracle, all);
  report(2, "hungarian-oracle", hungarian_oracle, all);
  report(3, "gradient-check", gradient_check, all);

  Dataset gt;
  try {
    gt = fixture();
  } catch (const std::exception& e) {
    std::printf("error building the metric fixture: %s\n", e.what());
  }
  report(4, "metric-ceiling-floor", [&] { return metric_bounds(gt); }, all);
  report(5, "reversal-invariance", [&] { return reversal(gt); }, all);
  report(6, "hand-ap", hand_ap, all);

  EndToEnd first;
  report(7, "end-to-end-fit", [&] {
    first = end_to_end("finer", "", "desk_finer.json");
    const auto& m = first.metrics;
    const bool pass = m.ap50 == 1.0 && m.ap >= 0.9 && first.seconds < 600.0;
    std::ostringstream s;
    s << fmt("AP50 %.4f AP %.4f AP_easy %.4f PCD %.4f", m.ap50, m.ap, m.ap_easy, m.pcd)
      << fmt(", %.1f s; loss %.4g -> %.4g", first.seconds, first.first_loss, first.last_loss) << ", retained "
      << first.retained << "/" << first.gt_paths << " paths";
    return Outcome{pass, s.str()};
  }, all);

  report(8, "relu-vs-finer-corners", [&] {
    const auto finer = end_to_end("curved_finer", "--bend 0.1", "desk_finer.json");
    const auto relu = end_to_end("curved_relu", "--bend 0.1", "desk_relu.json");
    const double sd_finer = max_second_difference("curved_finer");
    const double sd_relu = max_second_difference("curved_relu");
    return Outcome{sd_relu > sd_finer, fmt("max second difference relu %.5f > finer %.5f (AP50 %.3f / %.3f)", sd_relu,
                                           sd_finer, relu.metrics.ap50, finer.metrics.ap50)};
  }, all);

  report(9, "determinism", [&] {
    if (first.checkpoint.empty()) return Outcome{false, "criterion 7 did not produce artifacts"};
    const auto again = end_to_end("finer_repeat", "", "desk_finer.json");
    const bool ck = read_bytes(first.checkpoint) == read_bytes(again.checkpoint);
    const bool rep = read_bytes(first.report) == read_bytes(again.report);
    return Outcome{ck && rep, std::string("checkpoint ") + (ck ? "identical" : "differs") + ", report " +
                                  (rep ? "identical" : "differs")};
  }, all);

  return all ? 0 : 1;
}
