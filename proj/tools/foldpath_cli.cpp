#include "foldpath/io.hpp"
#include "foldpath/metrics.hpp"
#include "foldpath/synthetic.hpp"
#include "foldpath/trainer.hpp"

#include "CLI11.hpp"

#include <cstdio>
#include <iostream>
#include <thread>

using namespace foldpath;

namespace {

enum ExitCode { kOk = 0, kValidation = 1, kRuntime = 2 };

struct EvaluateArgs {
  std::string gt, pred, out;
  double delta = 0.025;
  double theta = 10.0;
  std::size_t samples = 384;
  unsigned threads = 0;
};

int run_evaluate(const EvaluateArgs& a) {
  const Dataset gt = load_dataset(a.gt);
  const Dataset pred = load_dataset(a.pred);
  const unsigned threads = a.threads > 0 ? a.threads : std::max(1u, std::thread::hardware_concurrency());
  const EvalReport report = evaluate(make_eval_set(gt, pred), Thresholds{a.delta, a.theta}, a.samples, threads);
  if (!a.out.empty()) save_report(a.out, report);
  std::printf("PCD        %.6f\nAP_DTW^50  %.6f\nAP_DTW     %.6f\nAP_DTW^easy %.6f\n", report.pcd, report.ap50,
              report.ap, report.ap_easy);
  return kOk;
}

struct FitArgs {
  std::string dataset, config, checkpoint;
  bool resume = false;
  std::size_t log_every = 0;
};

int run_fit(const FitArgs& a) {
  const Dataset data = load_dataset(a.dataset);
  const FitConfig cfg = load_fit_config(a.config);
  auto log = [&](const TrainState& s, double loss) {
    if (a.log_every > 0 && s.epoch % a.log_every == 0) {
      const auto& last = s.history.back();
      std::fprintf(stderr, "epoch %llu step %llu loss %.6g (points %.6g conf %.6g)\n",
                   static_cast<unsigned long long>(s.epoch), static_cast<unsigned long long>(s.step), loss,
                   last.points, last.conf);
    }
  };
  Checkpoint ck;
  ck.train = cfg.train;
  if (a.resume) {
    ck = load_checkpoint(a.checkpoint);
    ck.train = cfg.train;
    resume(ck.state, data, ck.train, log);
  } else {
    ck.state = fit(data, cfg.head, cfg.train, log);
  }
  save_checkpoint(a.checkpoint, ck);
  if (!ck.state.history.empty()) {
    std::printf("steps %llu final loss %.6g\n", static_cast<unsigned long long>(ck.state.step),
                ck.state.history.back().total);
  }
  return kOk;
}

struct PredictArgs {
  std::string checkpoint, out;
  std::vector<std::string> objects;
  std::size_t samples = 384;
  double threshold = 0.5;
};

int run_predict(const PredictArgs& a) {
  const Checkpoint ck = load_checkpoint(a.checkpoint);
  std::vector<std::string> ids = a.objects;
  if (ids.empty()) {
    for (const auto& o : ck.state.objects) ids.push_back(o.id);
  }
  Dataset out;
  for (const auto& id : ids) {
    ObjectRecord rec;
    rec.id = id;
    rec.predictions = predict(ck.state, id, a.samples, a.threshold);
    std::printf("%s: %zu paths\n", id.c_str(), rec.predictions.size());
    out.push_back(std::move(rec));
  }
  save_dataset(a.out, out);
  return kOk;
}

struct GenArgs {
  SyntheticConfig config;
  std::size_t objects = 1;
  std::string out;
};

int run_gen(const GenArgs& a) {
  save_dataset(a.out, gen_raster_dataset(a.config, a.objects));
  return kOk;
}

struct DtwArgs {
  std::string a, b;
};

int run_dtw(const DtwArgs& args) {
  const auto a = positions(load_pose_list(args.a));
  const auto b = positions(load_pose_list(args.b));
  const AlignmentResult r = dtw_align(a, b);
  Json warp = Json::array();
  for (const auto& [i, j] : r.warp) warp.push_back(Json::array({i, j}));
  std::cout << Json{{"cost", r.cost}, {"warp", warp}}.dump() << '\n';
  return kOk;
}

struct ResampleArgs {
  std::string in, out;
  std::size_t t = 384;
  std::string strategy = "equispaced";
  std::uint64_t seed = 0;
  double noise_sigma = -1.0;
};

int run_resample(const ResampleArgs& a) {
  Dataset data = load_dataset(a.in);
  ParamSamplingConfig sampling;
  sampling.strategy = sampling_strategy_from_string(a.strategy);
  sampling.count = a.t;
  sampling.seed = a.seed;
  if (a.noise_sigma >= 0.0) sampling.noise_sigma = a.noise_sigma;
  const auto params = sample_params(sampling);
  for (auto& obj : data) {
    for (auto& p : obj.gt_paths) p = resample(p, params);
    for (auto& p : obj.predictions) p.path = resample(p.path, params);
  }
  save_dataset(a.out, data);
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"FoldPath path representation, losses, training and DTW-based evaluation"};
  app.require_subcommand(1);
  int code = kOk;

  EvaluateArgs ev;
  auto* evaluate_cmd = app.add_subcommand("evaluate", "Score predictions against ground truth");
  evaluate_cmd->add_option("--gt", ev.gt, "Ground-truth dataset")->required();
  evaluate_cmd->add_option("--pred", ev.pred, "Prediction dataset")->required();
  evaluate_cmd->add_option("--delta", ev.delta, "Distance threshold (normalized space)")->capture_default_str();
  evaluate_cmd->add_option("--theta", ev.theta, "Angle threshold in degrees")->capture_default_str();
  evaluate_cmd->add_option("--samples", ev.samples, "Resample every path to this many poses (0 keeps them)")
      ->capture_default_str();
  evaluate_cmd->add_option("--threads", ev.threads, "Worker threads (0: hardware concurrency)");
  evaluate_cmd->add_option("--out", ev.out, "Report file");
  evaluate_cmd->callback([&] { code = run_evaluate(ev); });

  FitArgs fa;
  auto* fit_cmd = app.add_subcommand("fit", "Train the auto-decoder on a dataset");
  fit_cmd->add_option("--dataset", fa.dataset, "Training dataset")->required();
  fit_cmd->add_option("--config", fa.config, "Head and training configuration")->required();
  fit_cmd->add_option("--checkpoint", fa.checkpoint, "Checkpoint to write")->required();
  fit_cmd->add_flag("--resume", fa.resume, "Continue from the existing checkpoint");
  fit_cmd->add_option("--log-every", fa.log_every, "Log every N epochs to stderr (0: silent)");
  fit_cmd->callback([&] { code = run_fit(fa); });

  PredictArgs pa;
  auto* predict_cmd = app.add_subcommand("predict", "Decode paths for trained objects");
  predict_cmd->add_option("--checkpoint", pa.checkpoint, "Trained checkpoint")->required();
  predict_cmd->add_option("--object", pa.objects, "Object id (repeatable; default: all)");
  predict_cmd->add_option("--samples", pa.samples, "Poses per path")->capture_default_str();
  predict_cmd->add_option("--threshold", pa.threshold, "Confidence threshold")->capture_default_str();
  predict_cmd->add_option("--out", pa.out, "Prediction dataset to write")->required();
  predict_cmd->callback([&] { code = run_predict(pa); });

  GenArgs ga;
  auto* gen_cmd = app.add_subcommand("gen", "Generate synthetic serpentine raster objects");
  gen_cmd->add_option("--strokes", ga.config.strokes, "Strokes per object")->capture_default_str();
  gen_cmd->add_option("--waypoints", ga.config.waypoints_per_stroke, "Waypoints per stroke")->capture_default_str();
  gen_cmd->add_option("--seed", ga.config.seed, "Random seed")->capture_default_str();
  gen_cmd->add_option("--objects", ga.objects, "Number of objects")->capture_default_str();
  gen_cmd->add_option("--bend", ga.config.bend, "In-plane arc amplitude of each stroke")->capture_default_str();
  gen_cmd->add_option("--jitter", ga.config.jitter_sigma, "Gaussian waypoint jitter")->capture_default_str();
  gen_cmd->add_option("--cloud-points", ga.config.cloud_points, "Point-cloud samples")->capture_default_str();
  gen_cmd->add_option("--out", ga.out, "Dataset to write")->required();
  gen_cmd->callback([&] { code = run_gen(ga); });

  DtwArgs da;
  auto* dtw_cmd = app.add_subcommand("dtw", "Align two pose lists and dump cost and warp");
  dtw_cmd->add_option("--a", da.a, "First pose list")->required();
  dtw_cmd->add_option("--b", da.b, "Second pose list")->required();
  dtw_cmd->callback([&] { code = run_dtw(da); });

  ResampleArgs ra;
  auto* resample_cmd = app.add_subcommand("resample", "Resample every path in a dataset");
  resample_cmd->add_option("--in", ra.in, "Input dataset")->required();
  resample_cmd->add_option("--t", ra.t, "Poses per path")->capture_default_str();
  resample_cmd->add_option("--strategy", ra.strategy, "equispaced | noisy-equispaced | uniform")
      ->capture_default_str();
  resample_cmd->add_option("--seed", ra.seed, "Seed for random strategies");
  resample_cmd->add_option("--noise-sigma", ra.noise_sigma, "Noise for noisy-equispaced (default 0.5/T)");
  resample_cmd->add_option("--out", ra.out, "Dataset to write")->required();
  resample_cmd->callback([&] { code = run_resample(ra); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kValidation;
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kValidation;
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kValidation;
  } catch (const std::domain_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kRuntime;
  }
  return code;
}
