// Command-line front end: train a miniature fusion classifier on synthetic
// multimodal data, attribute its predictions with divide-and-conquer Shapley
// maps, run the ground-truth labeling rule over probability CSVs, evaluate
// prediction files, and expose the log-mel spectrogram pipeline.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "dncshap/attribution.hpp"
#include "dncshap/audio.hpp"
#include "dncshap/checkpoint.hpp"
#include "dncshap/error.hpp"
#include "dncshap/fusion.hpp"
#include "dncshap/imageio.hpp"
#include "dncshap/labeling.hpp"
#include "dncshap/metrics.hpp"
#include "dncshap/synth.hpp"
#include "dncshap/train.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw dncshap::UserError(dir + ": cannot create output directory: " + ec.message());
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) cells.push_back(cell);
  return cells;
}

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

bool parse_double(const std::string& s, double& out) {
  try {
    std::size_t pos = 0;
    out = std::stod(s, &pos);
    while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos]))) ++pos;
    return pos == s.size();
  } catch (const std::exception&) {
    return false;
  }
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

struct TrainArgs {
  std::uint64_t seed = 0;
  std::string out_dir;
  std::string config_path;
  std::string topology = "proposed";
  int epochs = 30;
  int batch_size = 64;
  double lr = 1e-3;
  double train_split = 0.7;
  int samples = 256;
  int input_size = 16;
  std::vector<int> n1_filters = {4, 8, 16};
  std::vector<int> n2_filters = {4, 8, 16};
  int embed = 32;
  int head = 64;
  double gamma = 2.0;
  double ce_weight = 1.0;
  double focal_weight = 0.5;
  int patience = 5;
  int plateau_patience = 2;
  std::string ablate = "none";
};

// Key=value config file for `train` (# starts a comment). Keys are the long
// option names without the leading dashes; explicitly passed flags win.
void apply_train_config(TrainArgs& a, const CLI::App& train) {
  std::ifstream in(a.config_path);
  if (!in) throw dncshap::UserError(a.config_path + ": cannot open config file");

  auto want = [&train](const std::string& key) { return train.count("--" + key) == 0; };
  auto to_int = [](const std::string& key, const std::string& v) {
    try {
      return std::stoi(v);
    } catch (const std::exception&) {
      throw dncshap::UserError("config: bad integer for '" + key + "': " + v);
    }
  };
  auto to_double = [](const std::string& key, const std::string& v) {
    double d;
    if (!parse_double(v, d)) throw dncshap::UserError("config: bad number for '" + key + "': " + v);
    return d;
  };
  auto to_int_list = [&to_int](const std::string& key, const std::string& v) {
    std::vector<int> out;
    std::stringstream ss(v);
    std::string cell;
    while (std::getline(ss, cell, ',')) out.push_back(to_int(key, trim(cell)));
    return out;
  };

  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw dncshap::UserError(a.config_path + ": line " + std::to_string(line_no) + ": expected key=value");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));

    if (key == "topology") {
      if (want(key)) a.topology = value;
    } else if (key == "epochs") {
      if (want(key)) a.epochs = to_int(key, value);
    } else if (key == "batch-size") {
      if (want(key)) a.batch_size = to_int(key, value);
    } else if (key == "lr") {
      if (want(key)) a.lr = to_double(key, value);
    } else if (key == "train-split") {
      if (want(key)) a.train_split = to_double(key, value);
    } else if (key == "samples") {
      if (want(key)) a.samples = to_int(key, value);
    } else if (key == "input-size") {
      if (want(key)) a.input_size = to_int(key, value);
    } else if (key == "n1-filters") {
      if (want(key)) a.n1_filters = to_int_list(key, value);
    } else if (key == "n2-filters") {
      if (want(key)) a.n2_filters = to_int_list(key, value);
    } else if (key == "embed") {
      if (want(key)) a.embed = to_int(key, value);
    } else if (key == "head") {
      if (want(key)) a.head = to_int(key, value);
    } else if (key == "gamma") {
      if (want(key)) a.gamma = to_double(key, value);
    } else if (key == "ce-weight") {
      if (want(key)) a.ce_weight = to_double(key, value);
    } else if (key == "focal-weight") {
      if (want(key)) a.focal_weight = to_double(key, value);
    } else if (key == "patience") {
      if (want(key)) a.patience = to_int(key, value);
    } else if (key == "plateau-patience") {
      if (want(key)) a.plateau_patience = to_int(key, value);
    } else if (key == "ablate") {
      if (want(key)) a.ablate = value;
    } else {
      throw dncshap::UserError(a.config_path + ": line " + std::to_string(line_no) + ": unknown key '" + key +
                               "'");
    }
  }
}

int run_train(const TrainArgs& a) {
  ensure_dir(a.out_dir);
  dncshap::FusionConfig cfg;
  cfg.topology = dncshap::parse_topology(a.topology);
  cfg.input_size = a.input_size;
  if (a.n1_filters.size() != 3 || a.n2_filters.size() != 3) {
    throw dncshap::UserError("train: --n1-filters/--n2-filters need exactly three values");
  }
  for (int i = 0; i < 3; ++i) {
    cfg.n1_filters[static_cast<std::size_t>(i)] = a.n1_filters[static_cast<std::size_t>(i)];
    cfg.n2_filters[static_cast<std::size_t>(i)] = a.n2_filters[static_cast<std::size_t>(i)];
  }
  cfg.embed_width = a.embed;
  cfg.head_width = a.head;
  cfg.num_classes = 4;
  cfg.seed = a.seed;

  dncshap::ParallelNetMini net = dncshap::build_parallel_net(cfg);
  std::vector<dncshap::Sample> data = dncshap::make_multimodal_dataset(a.samples, a.input_size, a.seed + 1);
  if (a.ablate == "image") {
    dncshap::apply_ablation(data, dncshap::Ablation::image_only);
  } else if (a.ablate == "speech") {
    dncshap::apply_ablation(data, dncshap::Ablation::speech_only);
  } else if (a.ablate != "none") {
    throw dncshap::UserError("train: --ablate must be none|image|speech");
  }

  dncshap::TrainConfig tc;
  tc.epochs = a.epochs;
  tc.batch_size = a.batch_size;
  tc.lr = a.lr;
  tc.train_split = a.train_split;
  tc.early_stop_patience = a.patience;
  tc.plateau_patience = a.plateau_patience;
  tc.loss.ce_weight = a.ce_weight;
  tc.loss.focal_weight = a.focal_weight;
  tc.loss.focal_gamma = a.gamma;
  tc.seed = a.seed + 2;

  const dncshap::TrainResult result = dncshap::train_toy(net, data, tc);

  const fs::path out(a.out_dir);
  dncshap::save_checkpoint((out / "model.ckpt").string(), net);
  dncshap::write_history_csv((out / "history.csv").string(), result.history);
  std::cout << "wrote " << (out / "model.ckpt").string() << " and history.csv (" << result.history.size()
            << " epochs" << (result.stopped_early ? ", early stop" : "") << ")\n";
  return 0;
}

// ---------------------------------------------------------------------------
// attribute
// ---------------------------------------------------------------------------

struct AttributeArgs {
  std::string model_path;
  std::string image_path;
  std::string wav_path;
  std::string speech_csv;
  std::string alignment_path;
  std::string out_dir;
  std::string stem = "attribution";
  std::string gt;
  std::vector<std::string> classes = dncshap::default_class_names();
  std::uint64_t seed = 0;
  int times = 6;
  int jobs = 1;
  double baseline = 0.0;
  double percentile = 30.0;
  double frame_duration = 0.0;
  int fft_size = 1024;
};

int run_attribute(const AttributeArgs& a) {
  ensure_dir(a.out_dir);
  const dncshap::ParallelNetMini net = dncshap::load_checkpoint(a.model_path);
  const int s = net.input_size();

  dncshap::Tensor image = dncshap::read_pnm(a.image_path);
  if (image.dim(2) == 1) {  // grayscale PGM: replicate to three channels
    dncshap::Tensor rgb({image.dim(0), image.dim(1), 3});
    for (int r = 0; r < image.dim(0); ++r) {
      for (int c = 0; c < image.dim(1); ++c) {
        for (int k = 0; k < 3; ++k) rgb.at3(r, c, k) = image.at3(r, c, 0);
      }
    }
    image = std::move(rgb);
  }
  if (image.dim(0) != s || image.dim(1) != s) {
    throw dncshap::UserError(a.image_path + ": image is " + image.shape_str() + " but the model expects (" +
                             std::to_string(s) + "," + std::to_string(s) + ",3)");
  }

  dncshap::Tensor speech;
  double frame_duration = a.frame_duration;
  if (!a.wav_path.empty()) {
    const dncshap::Waveform wave = dncshap::read_wav(a.wav_path);
    dncshap::LogmelConfig lm;
    lm.n_mels = s;
    lm.n_frames = s;
    lm.fft_size = a.fft_size;
    speech = dncshap::logmel(wave, lm);
    if (frame_duration <= 0.0) {
      const int len = static_cast<int>(wave.samples.size());
      const int hop = std::max(1, lm.n_frames > 1 ? (len - lm.fft_size) / (lm.n_frames - 1) : 1);
      frame_duration = static_cast<double>(hop) / wave.sample_rate;
    }
  } else if (!a.speech_csv.empty()) {
    dncshap::Tensor m = dncshap::read_matrix_csv(a.speech_csv);
    if (m.dim(0) != s || m.dim(1) != s) {
      throw dncshap::UserError(a.speech_csv + ": spectrogram is " + m.shape_str() + " but the model expects (" +
                               std::to_string(s) + "," + std::to_string(s) + ")");
    }
    speech = dncshap::Tensor({s, s, 1}, std::move(m.data));
  } else {
    throw dncshap::UserError("attribute: provide --speech (WAV) or --speech-csv (spectrogram matrix)");
  }

  dncshap::AttributionRequest req;
  req.model = [&net](const dncshap::Tensor& img, const dncshap::Tensor& spc) { return net.forward(img, spc); };
  req.image = std::move(image);
  req.speech = std::move(speech);
  req.times = a.times;
  req.baseline = a.baseline;
  req.jobs = a.jobs;
  const dncshap::AttributionResult res = dncshap::dnc_shap(req);

  json extra;
  if (res.arg_max < static_cast<int>(a.classes.size())) {
    extra["P"] = a.classes[static_cast<std::size_t>(res.arg_max)];
  } else {
    extra["P"] = res.arg_max;
  }
  extra["Score"] = res.pred_f;
  if (!a.gt.empty()) extra["GT"] = a.gt;
  extra["seed"] = a.seed;
  extra["times"] = a.times;

  if (!a.alignment_path.empty()) {
    const auto tokens = dncshap::load_alignment(a.alignment_path);
    if (frame_duration <= 0.0) {
      throw dncshap::UserError("attribute: --frame-duration is required with --alignment when speech comes from CSV");
    }
    const std::vector<double> importance = dncshap::time_importance(res.shap_speech);
    const auto intervals = dncshap::threshold_segments(importance, a.percentile);
    const auto words = dncshap::highlight_words(intervals, tokens, frame_duration);
    extra["words"] = words;
    std::ofstream wout(fs::path(a.out_dir) / (a.stem + ".words.txt"));
    for (const std::string& w : words) wout << w << "\n";
  }

  dncshap::write_attribution_artifacts(a.out_dir, a.stem, res, extra);
  std::cout << "wrote " << (fs::path(a.out_dir) / (a.stem + ".json")).string() << " (+ csv/pgm maps)\n";
  return 0;
}

// ---------------------------------------------------------------------------
// label
// ---------------------------------------------------------------------------

struct LabelArgs {
  std::string in_csv;
  std::string out_dir;
  double threshold = 0.5;
  bool require_same_label = false;
  std::vector<std::string> classes = dncshap::default_class_names();
};

int run_label(const LabelArgs& a) {
  ensure_dir(a.out_dir);
  std::ifstream in(a.in_csv);
  if (!in) throw dncshap::UserError(a.in_csv + ": cannot open");
  const std::size_t k = a.classes.size();

  std::ofstream out(fs::path(a.out_dir) / "decisions.csv");
  if (!out) throw dncshap::UserError("cannot open decisions.csv for writing");
  out << "sample_id,outcome,label,max1,max2,winner\n";

  dncshap::CorpusStats stats;
  int bad_rows = 0;
  int line_no = 0;
  std::string line;
  char buf[64];
  while (std::getline(in, line)) {
    ++line_no;
    line = trim(line);
    if (line.empty()) continue;
    const std::vector<std::string> cells = split_csv_line(line);
    if (line_no == 1 && cells.size() >= 2) {
      double probe;
      if (!parse_double(cells[1], probe)) continue;  // header row
    }
    if (cells.size() != 1 + 2 * k) {
      std::cerr << "row " << line_no << ": expected " << (1 + 2 * k) << " columns, got " << cells.size() << "\n";
      ++bad_rows;
      continue;
    }
    std::vector<double> ser(k), ier(k);
    bool ok = true;
    for (std::size_t i = 0; i < k && ok; ++i) ok = parse_double(cells[1 + i], ser[i]);
    for (std::size_t i = 0; i < k && ok; ++i) ok = parse_double(cells[1 + k + i], ier[i]);
    if (!ok) {
      std::cerr << "row " << line_no << ": non-numeric probability\n";
      ++bad_rows;
      continue;
    }
    dncshap::LabelDecision d;
    try {
      d = dncshap::assign_label(ser, ier, a.threshold, a.classes, a.require_same_label);
    } catch (const dncshap::Error& e) {
      std::cerr << "row " << line_no << ": " << e.what() << "\n";
      ++bad_rows;
      continue;
    }
    stats.add(d);
    std::snprintf(buf, sizeof(buf), "%.17g", d.max1);
    const std::string m1 = buf;
    std::snprintf(buf, sizeof(buf), "%.17g", d.max2);
    const std::string m2 = buf;
    out << cells[0] << "," << (d.assigned ? "assigned" : "discarded") << ","
        << (d.assigned ? dncshap::emotion_name(d.label) : "") << "," << m1 << "," << m2 << ","
        << (d.winner == dncshap::Winner::image ? "image" : "speech") << "\n";
  }

  std::ofstream stats_out(fs::path(a.out_dir) / "stats.json");
  stats_out << dncshap::stats_to_json(stats).dump(2) << "\n";
  std::cout << "labeled " << stats.total << " samples (" << stats.discarded << " discarded, " << bad_rows
            << " bad rows)\n";
  return bad_rows > 0 ? 1 : 0;
}

// ---------------------------------------------------------------------------
// eval
// ---------------------------------------------------------------------------

struct EvalArgs {
  std::string pred_csv;
  std::string truth_csv;
  std::string out_file;
};

std::map<std::string, std::string> read_label_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw dncshap::UserError(path + ": cannot open");
  std::map<std::string, std::string> out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    line = trim(line);
    if (line.empty()) continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != 2) throw dncshap::UserError(path + ": row " + std::to_string(line_no) + ": expected 'sample_id,label'");
    if (line_no == 1 && (cells[1] == "label" || cells[1] == "Label")) continue;
    if (!out.emplace(trim(cells[0]), trim(cells[1])).second) {
      throw dncshap::UserError(path + ": duplicate sample_id '" + cells[0] + "'");
    }
  }
  if (out.empty()) throw dncshap::UserError(path + ": no rows");
  return out;
}

int run_eval(const EvalArgs& a) {
  const auto pred = read_label_csv(a.pred_csv);
  const auto truth = read_label_csv(a.truth_csv);
  if (pred.size() != truth.size()) {
    throw dncshap::UserError("eval: prediction and truth files differ in length (" + std::to_string(pred.size()) +
                             " vs " + std::to_string(truth.size()) + ")");
  }
  std::set<std::string> class_set;
  for (const auto& [id, lbl] : truth) class_set.insert(lbl);
  for (const auto& [id, lbl] : pred) class_set.insert(lbl);
  std::map<std::string, int> class_index;
  std::vector<std::string> class_names;
  for (const std::string& c : class_set) {
    class_index[c] = static_cast<int>(class_names.size());
    class_names.push_back(c);
  }

  dncshap::ConfusionMatrix cm(static_cast<int>(class_names.size()));
  for (const auto& [id, t] : truth) {
    const auto it = pred.find(id);
    if (it == pred.end()) throw dncshap::UserError("eval: sample_id '" + id + "' missing from predictions");
    cm.add(class_index[t], class_index[it->second]);
  }

  json report = dncshap::metrics_report(cm);
  report["classes"] = class_names;
  if (a.out_file.empty() || a.out_file == "-") {
    std::cout << report.dump(2) << "\n";
  } else {
    if (fs::path(a.out_file).has_parent_path()) ensure_dir(fs::path(a.out_file).parent_path().string());
    std::ofstream out(a.out_file);
    if (!out) throw dncshap::UserError(a.out_file + ": cannot open for writing");
    out << report.dump(2) << "\n";
    std::cout << "wrote " << a.out_file << "\n";
  }
  return 0;
}

// ---------------------------------------------------------------------------
// spectrogram
// ---------------------------------------------------------------------------

struct SpectrogramArgs {
  std::string wav_path;
  std::string out_csv;
  std::string out_pgm;
  int mels = 128;
  int frames = 128;
  int fft = 1024;
  double fmin = 0.0;
  double fmax = 0.0;
};

int run_spectrogram(const SpectrogramArgs& a) {
  const dncshap::Waveform wave = dncshap::read_wav(a.wav_path);
  dncshap::LogmelConfig cfg;
  cfg.n_mels = a.mels;
  cfg.n_frames = a.frames;
  cfg.fft_size = a.fft;
  cfg.fmin = a.fmin;
  cfg.fmax = a.fmax;
  const dncshap::Tensor spec = dncshap::logmel(wave, cfg);
  dncshap::Tensor matrix({a.mels, a.frames}, spec.data);
  if (fs::path(a.out_csv).has_parent_path()) ensure_dir(fs::path(a.out_csv).parent_path().string());
  dncshap::write_matrix_csv(a.out_csv, matrix);
  if (!a.out_pgm.empty()) {
    dncshap::write_pgm(a.out_pgm, a.frames, a.mels, dncshap::render_heatmap(matrix));
  }
  std::cout << "wrote " << a.out_csv << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Divide-and-conquer Shapley attribution for a two-modality emotion classifier"};
  app.require_subcommand(1);

  TrainArgs train_args;
  CLI::App* train = app.add_subcommand("train", "Train a miniature fusion network on synthetic multimodal data");
  train->add_option("--config", train_args.config_path, "Key=value config file; explicit flags take precedence");
  train->add_option("--seed", train_args.seed, "RNG seed (weights, data, shuffling)")->required();
  train->add_option("--out", train_args.out_dir, "Output directory (model.ckpt, history.csv)")->required();
  train->add_option("--topology", train_args.topology, "proposed|baseline1|baseline2|baseline3");
  train->add_option("--epochs", train_args.epochs, "Epoch cap (default 30)");
  train->add_option("--batch-size", train_args.batch_size, "Minibatch size (default 64)");
  train->add_option("--lr", train_args.lr, "Adam learning rate (default 1e-3 at toy scale; 8e-6 full scale)");
  train->add_option("--train-split", train_args.train_split, "Train fraction (default 0.7)");
  train->add_option("--samples", train_args.samples, "Synthetic dataset size (default 256)");
  train->add_option("--input-size", train_args.input_size, "Raster side, multiple of 8 (default 16)");
  train->add_option("--n1-filters", train_args.n1_filters, "Three filter counts for N1")->delimiter(',');
  train->add_option("--n2-filters", train_args.n2_filters, "Three filter counts for N2")->delimiter(',');
  train->add_option("--embed", train_args.embed, "Embedding width (default 32)");
  train->add_option("--head", train_args.head, "Head width (default 64)");
  train->add_option("--gamma", train_args.gamma, "Focal loss focusing exponent (default 2)");
  train->add_option("--ce-weight", train_args.ce_weight, "Cross-entropy weight (default 1)");
  train->add_option("--focal-weight", train_args.focal_weight, "Focal loss weight (default 0.5)");
  train->add_option("--patience", train_args.patience, "Early-stopping patience (default 5)");
  train->add_option("--plateau-patience", train_args.plateau_patience, "LR-halving patience (default 2)");
  train->add_option("--ablate", train_args.ablate, "none|image|speech: zero one modality");

  AttributeArgs attr_args;
  CLI::App* attr = app.add_subcommand("attribute", "Explain one prediction with DnC Shapley maps");
  attr->add_option("--model", attr_args.model_path, "Checkpoint file")->required();
  attr->add_option("--image", attr_args.image_path, "Input image (binary PPM P6 or grayscale PGM P5)")->required();
  attr->add_option("--speech", attr_args.wav_path, "Input speech (16-bit PCM WAV)");
  attr->add_option("--speech-csv", attr_args.speech_csv, "Precomputed spectrogram CSV matrix");
  attr->add_option("--alignment", attr_args.alignment_path, "Word alignment JSON [{word,start,end}...]");
  attr->add_option("--out", attr_args.out_dir, "Output directory")->required();
  attr->add_option("--stem", attr_args.stem, "Output file stem (default 'attribution')");
  attr->add_option("--gt", attr_args.gt, "Ground-truth label for the JSON summary");
  attr->add_option("--classes", attr_args.classes, "Class names (default anger,happy,hate,sad)")->delimiter(',');
  attr->add_option("--seed", attr_args.seed, "Seed recorded in the summary (attribution is deterministic)")
      ->required();
  attr->add_option("--times", attr_args.times, "Recursion depth (default 6)");
  attr->add_option("--jobs", attr_args.jobs, "Worker threads for model evaluations")
      ->envname("DNC_ATTRIB_JOBS");
  attr->add_option("--baseline", attr_args.baseline, "Absence baseline value (default 0)");
  attr->add_option("--percentile", attr_args.percentile, "Frame-importance percentile threshold (default 30)");
  attr->add_option("--frame-duration", attr_args.frame_duration, "Seconds per spectrogram frame (CSV input)");
  attr->add_option("--fft", attr_args.fft_size, "STFT size for WAV input (default 1024)");

  LabelArgs label_args;
  CLI::App* label = app.add_subcommand("label", "Run the ground-truth assignment rule over a probability CSV");
  label->add_option("--in", label_args.in_csv, "Input CSV: sample_id,ser_p1..pK,ier_p1..pK")->required();
  label->add_option("--out", label_args.out_dir, "Output directory (decisions.csv, stats.json)")->required();
  label->add_option("--threshold", label_args.threshold, "Confidence threshold (default 0.5)");
  label->add_flag("--require-same-label", label_args.require_same_label,
                  "Also discard samples where the two models disagree");
  label->add_option("--classes", label_args.classes, "Source class names in column order")->delimiter(',');

  EvalArgs eval_args;
  CLI::App* eval = app.add_subcommand("eval", "Metrics (accuracy, macro-F1, Cohen's kappa) from label CSVs");
  eval->add_option("--pred", eval_args.pred_csv, "Predictions CSV: sample_id,label")->required();
  eval->add_option("--truth", eval_args.truth_csv, "Ground-truth CSV: sample_id,label")->required();
  eval->add_option("--out", eval_args.out_file, "Metrics JSON path ('-' for stdout)");

  SpectrogramArgs spec_args;
  CLI::App* spec = app.add_subcommand("spectrogram", "Convert a WAV file to a log-mel spectrogram CSV");
  spec->add_option("--wav", spec_args.wav_path, "Input WAV")->required();
  spec->add_option("--out", spec_args.out_csv, "Output CSV matrix")->required();
  spec->add_option("--pgm", spec_args.out_pgm, "Optional PGM preview");
  spec->add_option("--mels", spec_args.mels, "Mel bands (default 128)");
  spec->add_option("--frames", spec_args.frames, "Time frames (default 128)");
  spec->add_option("--fft", spec_args.fft, "FFT size, power of two (default 1024)");
  spec->add_option("--fmin", spec_args.fmin, "Lowest mel edge in Hz (default 0)");
  spec->add_option("--fmax", spec_args.fmax, "Highest mel edge in Hz (default sr/2)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (train->parsed()) {
      if (!train_args.config_path.empty()) apply_train_config(train_args, *train);
      return run_train(train_args);
    }
    if (attr->parsed()) return run_attribute(attr_args);
    if (label->parsed()) return run_label(label_args);
    if (eval->parsed()) return run_eval(eval_args);
    if (spec->parsed()) return run_spectrogram(spec_args);
  } catch (const dncshap::UserError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const dncshap::FormatError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const dncshap::ShapeError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const dncshap::DivergenceError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 2;
  }
  return 2;
}
