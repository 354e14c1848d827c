#include "foldpath/io.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace foldpath {

namespace {

constexpr const char* kDatasetFormat = "foldpath-dataset";
constexpr const char* kCheckpointFormat = "foldpath-checkpoint";

[[noreturn]] void fail(const std::string& where, const std::string& what) {
  throw ValidationError(where + ": " + what);
}

double number(const Json& j, const std::string& where) {
  if (!j.is_number()) fail(where, "expected a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) fail(where, "non-finite number");
  return v;
}

const Json& array(const Json& j, const std::string& where) {
  if (!j.is_array()) fail(where, "expected an array");
  return j;
}

Json vec_to_json(const Vec3& v) { return Json::array({v.x(), v.y(), v.z()}); }

Json pose_to_json(const Pose6D& p) {
  return Json::array({p.position.x(), p.position.y(), p.position.z(), p.orientation.x(), p.orientation.y(),
                      p.orientation.z()});
}

Json poses_to_json(const std::vector<Pose6D>& poses) {
  Json out = Json::array();
  for (const auto& p : poses) out.push_back(pose_to_json(p));
  return out;
}

Vec3 vec_from_json(const Json& j, const std::string& where) {
  array(j, where);
  if (j.size() != 3) fail(where, "expected 3 numbers, got " + std::to_string(j.size()));
  return Vec3(number(j[0], where + "[0]"), number(j[1], where + "[1]"), number(j[2], where + "[2]"));
}

Pose6D pose_from_json(const Json& j, const std::string& where) {
  array(j, where);
  if (j.size() != 6) fail(where, "expected 6 numbers, got " + std::to_string(j.size()));
  Pose6D p;
  for (int k = 0; k < 3; ++k) {
    p.position[k] = number(j[static_cast<std::size_t>(k)], where);
    p.orientation[k] = number(j[static_cast<std::size_t>(k + 3)], where);
  }
  try {
    check_pose(p);
  } catch (const std::domain_error& e) {
    fail(where, e.what());
  }
  return p;
}

Path path_from_json(const Json& j, const std::string& where) {
  array(j, where);
  if (j.size() < 2) fail(where, "a path needs at least 2 poses, got " + std::to_string(j.size()));
  Path path;
  path.poses.reserve(j.size());
  for (std::size_t t = 0; t < j.size(); ++t) path.poses.push_back(pose_from_json(j[t], where + "[" + std::to_string(t) + "]"));
  return path;
}

template <typename T>
void read_field(const Json& doc, const char* key, T& field, const std::string& where) {
  if (!doc.contains(key)) return;
  try {
    field = doc.at(key).get<T>();
  } catch (const Json::exception&) {
    fail(where + "." + key, "wrong type");
  }
}

void reject_unknown(const Json& doc, std::initializer_list<const char*> keys, const std::string& where) {
  if (!doc.is_object()) fail(where, "expected an object");
  std::set<std::string> known(keys.begin(), keys.end());
  for (const auto& item : doc.items()) {
    if (!known.count(item.key())) fail(where, "unknown field '" + item.key() + "'");
  }
}

Json matrix_to_json(const Matrix& m) {
  Json rows = Json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    Json row = Json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

Json vector_to_json(const Vector& v) {
  Json out = Json::array();
  for (Eigen::Index k = 0; k < v.size(); ++k) out.push_back(v(k));
  return out;
}

void matrix_from_json(const Json& j, Matrix& m, const std::string& where) {
  array(j, where);
  if (static_cast<Eigen::Index>(j.size()) != m.rows()) {
    fail(where, "expected " + std::to_string(m.rows()) + " rows, got " + std::to_string(j.size()));
  }
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    const auto& row = array(j[static_cast<std::size_t>(r)], where);
    if (static_cast<Eigen::Index>(row.size()) != m.cols()) {
      fail(where, "row " + std::to_string(r) + " has " + std::to_string(row.size()) + " entries, expected " +
                      std::to_string(m.cols()));
    }
    for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = number(row[static_cast<std::size_t>(c)], where);
  }
}

void vector_from_json(const Json& j, Vector& v, const std::string& where) {
  array(j, where);
  if (static_cast<Eigen::Index>(j.size()) != v.size()) {
    fail(where, "expected " + std::to_string(v.size()) + " entries, got " + std::to_string(j.size()));
  }
  for (Eigen::Index k = 0; k < v.size(); ++k) v(k) = number(j[static_cast<std::size_t>(k)], where);
}

Json dense_to_json(const Dense& d) { return Json{{"weight", matrix_to_json(d.weight)}, {"bias", vector_to_json(d.bias)}}; }

void dense_from_json(const Json& j, Dense& d, const std::string& where) {
  if (!j.is_object() || !j.contains("weight") || !j.contains("bias")) fail(where, "expected {weight, bias}");
  matrix_from_json(j["weight"], d.weight, where + ".weight");
  vector_from_json(j["bias"], d.bias, where + ".bias");
}

Json layers_to_json(const HeadParams& p) {
  Json blocks = Json::array();
  for (const auto& b : p.blocks) blocks.push_back(dense_to_json(b));
  Json modulator = Json::array();
  for (const auto& m : p.modulator) modulator.push_back(dense_to_json(m));
  return Json{{"blocks", blocks},
              {"out", dense_to_json(p.out)},
              {"modulator", modulator},
              {"conf_hidden", dense_to_json(p.conf_hidden)},
              {"conf_out", dense_to_json(p.conf_out)}};
}

// Fills `p` (already shaped) from a layer document.
void layers_from_json(const Json& j, HeadParams& p, const std::string& where) {
  if (!j.is_object()) fail(where, "expected an object");
  for (const char* key : {"blocks", "out", "modulator", "conf_hidden", "conf_out"}) {
    if (!j.contains(key)) fail(where, std::string("missing '") + key + "'");
  }
  auto list = [&](const char* key, std::vector<Dense>& dst) {
    const auto& arr = array(j[key], where + "." + key);
    if (arr.size() != dst.size()) {
      fail(where + "." + key, "expected " + std::to_string(dst.size()) + " layers, got " + std::to_string(arr.size()));
    }
    for (std::size_t l = 0; l < dst.size(); ++l) dense_from_json(arr[l], dst[l], where + "." + key + "[" + std::to_string(l) + "]");
  };
  list("blocks", p.blocks);
  dense_from_json(j["out"], p.out, where + ".out");
  list("modulator", p.modulator);
  dense_from_json(j["conf_hidden"], p.conf_hidden, where + ".conf_hidden");
  dense_from_json(j["conf_out"], p.conf_out, where + ".conf_out");
}

HeadParams shaped_head(const HeadConfig& config) {
  HeadConfig zero_seed = config;
  return zeros_like(init_head(zero_seed));
}

void check_format(const Json& doc, const char* expected) {
  if (!doc.is_object()) throw ParseError(std::string("expected a JSON object for ") + expected);
  if (doc.contains("format") && doc["format"] != expected) {
    throw ParseError(std::string("document format is ") + doc["format"].dump() + ", expected \"" + expected + "\"");
  }
}

}  // namespace

Json dataset_to_json(const Dataset& dataset) {
  Json objects = Json::array();
  for (const auto& obj : dataset) {
    Json o{{"id", obj.id}};
    if (!obj.point_cloud.empty()) {
      Json cloud = Json::array();
      for (const auto& p : obj.point_cloud) cloud.push_back(vec_to_json(p));
      o["point_cloud"] = std::move(cloud);
    }
    Json paths = Json::array();
    for (const auto& path : obj.gt_paths) paths.push_back(poses_to_json(path.poses));
    o["paths"] = std::move(paths);
    if (!obj.predictions.empty()) {
      Json preds = Json::array();
      for (const auto& p : obj.predictions) preds.push_back(Json{{"confidence", p.confidence}, {"poses", poses_to_json(p.path.poses)}});
      o["predictions"] = std::move(preds);
    }
    objects.push_back(std::move(o));
  }
  return Json{{"format", kDatasetFormat}, {"version", 1}, {"objects", std::move(objects)}};
}

Dataset dataset_from_json(const Json& doc) {
  check_format(doc, kDatasetFormat);
  if (!doc.contains("objects") || !doc["objects"].is_array()) throw ParseError("dataset: missing 'objects' array");

  Dataset out;
  std::set<std::string> ids;
  const auto& objects = doc["objects"];
  for (std::size_t i = 0; i < objects.size(); ++i) {
    const auto& o = objects[i];
    const std::string slot = "objects[" + std::to_string(i) + "]";
    if (!o.is_object() || !o.contains("id") || !o["id"].is_string()) fail(slot, "missing string 'id'");
    ObjectRecord rec;
    rec.id = o["id"].get<std::string>();
    if (rec.id.empty()) fail(slot, "empty object id");
    if (!ids.insert(rec.id).second) fail(slot, "duplicate object id '" + rec.id + "'");
    const std::string where = "object '" + rec.id + "'";

    if (o.contains("point_cloud")) {
      const auto& cloud = array(o["point_cloud"], where + ": point_cloud");
      for (std::size_t k = 0; k < cloud.size(); ++k) {
        rec.point_cloud.push_back(vec_from_json(cloud[k], where + ": point_cloud[" + std::to_string(k) + "]"));
      }
    }
    if (o.contains("paths")) {
      const auto& paths = array(o["paths"], where + ": paths");
      for (std::size_t k = 0; k < paths.size(); ++k) {
        rec.gt_paths.push_back(path_from_json(paths[k], where + ": paths[" + std::to_string(k) + "]"));
      }
    }
    if (o.contains("predictions")) {
      const auto& preds = array(o["predictions"], where + ": predictions");
      for (std::size_t k = 0; k < preds.size(); ++k) {
        const std::string pw = where + ": predictions[" + std::to_string(k) + "]";
        if (!preds[k].is_object() || !preds[k].contains("confidence") || !preds[k].contains("poses")) {
          fail(pw, "expected {confidence, poses}");
        }
        PredictedPath p;
        p.confidence = number(preds[k]["confidence"], pw + ".confidence");
        if (p.confidence < 0.0 || p.confidence > 1.0) {
          fail(pw + ".confidence", "value " + preds[k]["confidence"].dump() + " outside [0, 1]");
        }
        p.path = path_from_json(preds[k]["poses"], pw + ".poses");
        rec.predictions.push_back(std::move(p));
      }
    }
    out.push_back(std::move(rec));
  }
  return out;
}

Json read_json(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw ParseError("cannot open '" + file.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  const std::string text = buf.str();
  try {
    return Json::parse(text);
  } catch (const Json::parse_error& e) {
    std::size_t line = 1, col = 1;
    const std::size_t limit = std::min<std::size_t>(e.byte > 0 ? e.byte - 1 : 0, text.size());
    for (std::size_t k = 0; k < limit; ++k) {
      if (text[k] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    throw ParseError(file.string() + ":" + std::to_string(line) + ":" + std::to_string(col) + ": " + e.what());
  }
}

void write_json(const std::filesystem::path& file, const Json& doc, int indent) {
  std::ofstream out(file, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write '" + file.string() + "'");
  out << doc.dump(indent) << '\n';
  if (!out) throw std::runtime_error("failed writing '" + file.string() + "'");
}

Dataset load_dataset(const std::filesystem::path& file) { return dataset_from_json(read_json(file)); }

void save_dataset(const std::filesystem::path& file, const Dataset& dataset) {
  write_json(file, dataset_to_json(dataset));
}

EvalSet make_eval_set(const Dataset& gt, const Dataset& pred) {
  EvalSet set;
  for (const auto& obj : gt) set[obj.id].gt = obj.gt_paths;
  for (const auto& obj : pred) {
    auto it = set.find(obj.id);
    if (it == set.end()) throw ValidationError("object '" + obj.id + "': predictions for an object without ground truth");
    it->second.predictions = obj.predictions;
  }
  return set;
}

Json report_to_json(const EvalReport& report) {
  Json objects = Json::object();
  for (const auto& [id, obj] : report.per_object) {
    Json paths = Json::array();
    for (const auto& p : obj.paths) {
      paths.push_back(Json{{"prediction", p.prediction},
                           {"confidence", p.confidence},
                           {"fscore", p.fscore},
                           {"reversed", p.reversed},
                           {"best_gt", p.best_gt ? Json(*p.best_gt) : Json(nullptr)}});
    }
    objects[id] = Json{{"pcd", obj.pcd ? Json(*obj.pcd) : Json(nullptr)}, {"gt_count", obj.gt_count}, {"paths", paths}};
  }
  return Json{{"metrics", {{"pcd", report.pcd}, {"ap50", report.ap50}, {"ap", report.ap}, {"ap_easy", report.ap_easy}}},
              {"settings",
               {{"delta", report.thresholds.delta}, {"theta", report.thresholds.theta_deg}, {"samples", report.samples}}},
              {"objects", objects}};
}

void save_report(const std::filesystem::path& file, const EvalReport& report) {
  write_json(file, report_to_json(report), 2);
}

Json head_config_to_json(const HeadConfig& c) {
  return Json{{"layers", c.layers},
              {"hidden", c.hidden},
              {"codeword", c.codeword},
              {"conf_hidden", c.conf_hidden},
              {"activation", std::string(to_string(c.activation))},
              {"conditioning", std::string(to_string(c.conditioning))},
              {"omega0", c.omega0},
              {"finer_bias_bound", c.finer_bias_bound},
              {"use_bias", c.use_bias},
              {"seed", c.seed}};
}

HeadConfig head_config_from_json(const Json& doc) {
  const std::string where = "head config";
  reject_unknown(doc, {"layers", "hidden", "codeword", "conf_hidden", "activation", "conditioning", "omega0",
                       "finer_bias_bound", "use_bias", "seed"},
                 where);
  HeadConfig c;
  read_field(doc, "layers", c.layers, where);
  read_field(doc, "hidden", c.hidden, where);
  read_field(doc, "codeword", c.codeword, where);
  read_field(doc, "conf_hidden", c.conf_hidden, where);
  read_field(doc, "omega0", c.omega0, where);
  read_field(doc, "finer_bias_bound", c.finer_bias_bound, where);
  read_field(doc, "use_bias", c.use_bias, where);
  read_field(doc, "seed", c.seed, where);
  try {
    std::string name;
    read_field(doc, "activation", name, where);
    if (!name.empty()) c.activation = activation_from_string(name);
    name.clear();
    read_field(doc, "conditioning", name, where);
    if (!name.empty()) c.conditioning = conditioning_from_string(name);
    validate(c);
  } catch (const std::domain_error& e) {
    fail(where, e.what());
  }
  return c;
}

Json train_config_to_json(const TrainConfig& c) {
  return Json{{"slots", c.slots},
              {"samples", c.samples},
              {"epochs", c.epochs},
              {"max_steps", c.max_steps},
              {"step_size", c.step_size},
              {"cosine_decay", c.cosine_decay},
              {"final_step_size", c.final_step_size},
              {"adam_beta1", c.adam_beta1},
              {"adam_beta2", c.adam_beta2},
              {"adam_eps", c.adam_eps},
              {"sampling", std::string(to_string(c.sampling))},
              {"noise_sigma", c.noise_sigma ? Json(*c.noise_sigma) : Json(nullptr)},
              {"seed", c.seed},
              {"gamma", c.gamma},
              {"codeword_sigma", c.codeword_sigma}};
}

TrainConfig train_config_from_json(const Json& doc) {
  const std::string where = "train config";
  reject_unknown(doc, {"slots", "samples", "epochs", "max_steps", "step_size", "cosine_decay", "final_step_size",
                       "adam_beta1", "adam_beta2", "adam_eps", "sampling", "noise_sigma", "seed", "gamma",
                       "codeword_sigma"},
                 where);
  TrainConfig c;
  read_field(doc, "slots", c.slots, where);
  read_field(doc, "samples", c.samples, where);
  read_field(doc, "epochs", c.epochs, where);
  read_field(doc, "max_steps", c.max_steps, where);
  read_field(doc, "step_size", c.step_size, where);
  read_field(doc, "cosine_decay", c.cosine_decay, where);
  read_field(doc, "final_step_size", c.final_step_size, where);
  read_field(doc, "adam_beta1", c.adam_beta1, where);
  read_field(doc, "adam_beta2", c.adam_beta2, where);
  read_field(doc, "adam_eps", c.adam_eps, where);
  read_field(doc, "seed", c.seed, where);
  read_field(doc, "gamma", c.gamma, where);
  read_field(doc, "codeword_sigma", c.codeword_sigma, where);
  if (doc.contains("noise_sigma") && !doc["noise_sigma"].is_null()) {
    c.noise_sigma = number(doc["noise_sigma"], where + ".noise_sigma");
  }
  if (doc.contains("sampling")) {
    try {
      c.sampling = sampling_strategy_from_string(doc["sampling"].get<std::string>());
    } catch (const std::exception& e) {
      fail(where + ".sampling", e.what());
    }
  }
  if (c.slots == 0) fail(where, "slots must be positive");
  if (c.samples == 0) fail(where, "samples must be positive");
  if (!(c.step_size > 0.0)) fail(where, "step_size must be positive");
  if (!(c.codeword_sigma >= 0.0)) fail(where, "codeword_sigma must be >= 0");
  return c;
}

Json head_to_json(const HeadParams& params) {
  Json doc = layers_to_json(params);
  doc["config"] = head_config_to_json(params.config);
  return doc;
}

HeadParams head_from_json(const Json& doc) {
  if (!doc.is_object() || !doc.contains("config")) throw ParseError("head document: missing 'config'");
  HeadParams p = shaped_head(head_config_from_json(doc["config"]));
  layers_from_json(doc, p, "head");
  return p;
}

FitConfig fit_config_from_json(const Json& doc) {
  reject_unknown(doc, {"head", "train"}, "fit config");
  FitConfig c;
  if (doc.contains("head")) c.head = head_config_from_json(doc["head"]);
  if (doc.contains("train")) c.train = train_config_from_json(doc["train"]);
  return c;
}

FitConfig load_fit_config(const std::filesystem::path& file) { return fit_config_from_json(read_json(file)); }

Json checkpoint_to_json(const Checkpoint& ck) {
  const auto& s = ck.state;
  Json objects = Json::array();
  for (const auto& o : s.objects) {
    objects.push_back(Json{{"id", o.id},
                           {"steps", o.steps},
                           {"codewords", matrix_to_json(o.codewords)},
                           {"m", matrix_to_json(o.m)},
                           {"v", matrix_to_json(o.v)}});
  }
  Json history = Json::array();
  for (const auto& h : s.history) history.push_back(Json::array({h.total, h.points, h.conf}));
  return Json{{"format", kCheckpointFormat},
              {"version", 1},
              {"train_config", train_config_to_json(ck.train)},
              {"head", head_to_json(s.head)},
              {"optimizer",
               {{"step", s.step},
                {"epoch", s.epoch},
                {"total_steps", s.total_steps},
                {"head_m", layers_to_json(s.head_m)},
                {"head_v", layers_to_json(s.head_v)}}},
              {"objects", objects},
              {"loss_history", history}};
}

Checkpoint checkpoint_from_json(const Json& doc) {
  check_format(doc, kCheckpointFormat);
  for (const char* key : {"train_config", "head", "optimizer", "objects", "loss_history"}) {
    if (!doc.contains(key)) throw ParseError(std::string("checkpoint: missing '") + key + "'");
  }
  Checkpoint ck;
  ck.train = train_config_from_json(doc["train_config"]);
  auto& s = ck.state;
  s.head = head_from_json(doc["head"]);
  s.head_m = zeros_like(s.head);
  s.head_v = zeros_like(s.head);
  const auto& opt = doc["optimizer"];
  try {
    s.step = opt.at("step").get<std::uint64_t>();
    s.epoch = opt.at("epoch").get<std::uint64_t>();
    s.total_steps = opt.at("total_steps").get<std::uint64_t>();
  } catch (const Json::exception&) {
    fail("checkpoint.optimizer", "missing or invalid step counters");
  }
  layers_from_json(opt.value("head_m", Json()), s.head_m, "checkpoint.optimizer.head_m");
  layers_from_json(opt.value("head_v", Json()), s.head_v, "checkpoint.optimizer.head_v");

  const auto rows = static_cast<Eigen::Index>(ck.train.slots);
  const auto cols = static_cast<Eigen::Index>(s.head.config.codeword);
  const auto& objects = array(doc["objects"], "checkpoint.objects");
  for (std::size_t i = 0; i < objects.size(); ++i) {
    const auto& o = objects[i];
    const std::string where = "checkpoint.objects[" + std::to_string(i) + "]";
    if (!o.is_object() || !o.contains("id") || !o["id"].is_string()) fail(where, "missing string 'id'");
    ObjectCodes codes;
    codes.id = o["id"].get<std::string>();
    read_field(o, "steps", codes.steps, where);
    codes.codewords = Matrix::Zero(rows, cols);
    codes.m = Matrix::Zero(rows, cols);
    codes.v = Matrix::Zero(rows, cols);
    matrix_from_json(o.value("codewords", Json()), codes.codewords, where + ".codewords");
    matrix_from_json(o.value("m", Json()), codes.m, where + ".m");
    matrix_from_json(o.value("v", Json()), codes.v, where + ".v");
    s.objects.push_back(std::move(codes));
  }
  const auto& history = array(doc["loss_history"], "checkpoint.loss_history");
  for (std::size_t k = 0; k < history.size(); ++k) {
    const std::string where = "checkpoint.loss_history[" + std::to_string(k) + "]";
    if (!history[k].is_array() || history[k].size() != 3) fail(where, "expected [total, points, conf]");
    s.history.push_back({number(history[k][0], where), number(history[k][1], where), number(history[k][2], where)});
  }
  return ck;
}

Checkpoint load_checkpoint(const std::filesystem::path& file) { return checkpoint_from_json(read_json(file)); }

void save_checkpoint(const std::filesystem::path& file, const Checkpoint& checkpoint) {
  write_json(file, checkpoint_to_json(checkpoint));
}

std::vector<Pose6D> load_pose_list(const std::filesystem::path& file) {
  Json doc = read_json(file);
  if (doc.is_object() && doc.contains("poses")) doc = doc["poses"];
  const std::string where = file.string();
  array(doc, where);
  std::vector<Pose6D> out;
  for (std::size_t k = 0; k < doc.size(); ++k) {
    const std::string w = where + "[" + std::to_string(k) + "]";
    array(doc[k], w);
    if (doc[k].size() == 3) {
      Pose6D p;
      p.position = vec_from_json(doc[k], w);
      out.push_back(p);
    } else {
      out.push_back(pose_from_json(doc[k], w));
    }
  }
  if (out.empty()) fail(where, "empty pose list");
  return out;
}

}  // namespace foldpath
