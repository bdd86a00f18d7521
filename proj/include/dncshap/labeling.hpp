#pragma once

#include <array>
#include <string>
#include <vector>

#include <json.hpp>

#include "dncshap/error.hpp"
#include "dncshap/loss.hpp"

namespace dncshap {

enum class Emotion : int { anger = 0, happy = 1, hate = 2, sad = 3 };

inline const char* emotion_name(Emotion e) {
  switch (e) {
    case Emotion::anger: return "anger";
    case Emotion::happy: return "happy";
    case Emotion::hate: return "hate";
    case Emotion::sad: return "sad";
  }
  return "?";
}

// Plutchik-wheel folding of the source-side labels onto the four target
// classes: excitement -> happy, disgust -> hate, identity for the rest.
inline Emotion relabel(const std::string& label) {
  if (label == "anger") return Emotion::anger;
  if (label == "happy" || label == "excitement") return Emotion::happy;
  if (label == "hate" || label == "disgust") return Emotion::hate;
  if (label == "sad") return Emotion::sad;
  throw UserError("relabel: unknown emotion label '" + label + "'");
}

inline const std::vector<std::string>& default_class_names() {
  static const std::vector<std::string> names = {"anger", "happy", "hate", "sad"};
  return names;
}

enum class Winner { speech, image };

struct LabelDecision {
  bool assigned = false;
  Emotion label = Emotion::anger;  // meaningful only when assigned
  int label_index = -1;            // argmax index in the winning vector
  double max1 = 0.0;               // speech-side confidence
  double max2 = 0.0;               // image-side confidence
  Winner winner = Winner::image;
};

namespace detail {
inline int argmax(const std::vector<double>& v) {
  int best = 0;
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (v[i] > v[best]) best = static_cast<int>(i);
  }
  return best;
}
}  // namespace detail

// Ground-truth assignment: take the more confident of the two classifiers'
// maxima; below the threshold the sample is discarded. Ties go to the image
// side (fixed rule; either choice is defensible). The optional
// require_same_label filter additionally discards samples where the two
// classifiers disagree after relabeling.
inline LabelDecision assign_label(const std::vector<double>& ser_probs, const std::vector<double>& ier_probs,
                                  double threshold = 0.5,
                                  const std::vector<std::string>& class_names = default_class_names(),
                                  bool require_same_label = false) {
  validate_probability_vector(ser_probs);
  validate_probability_vector(ier_probs);
  if (ser_probs.size() != class_names.size() || ier_probs.size() != class_names.size()) {
    throw UserError("assign_label: probability vector length does not match class list");
  }
  LabelDecision d;
  const int ser_arg = detail::argmax(ser_probs);
  const int ier_arg = detail::argmax(ier_probs);
  d.max1 = ser_probs[static_cast<std::size_t>(ser_arg)];
  d.max2 = ier_probs[static_cast<std::size_t>(ier_arg)];
  d.winner = d.max2 >= d.max1 ? Winner::image : Winner::speech;
  if (std::max(d.max1, d.max2) < threshold) {
    d.assigned = false;
    return d;
  }
  if (require_same_label && relabel(class_names[static_cast<std::size_t>(ser_arg)]) !=
                                relabel(class_names[static_cast<std::size_t>(ier_arg)])) {
    d.assigned = false;
    return d;
  }
  d.label_index = d.winner == Winner::image ? ier_arg : ser_arg;
  d.label = relabel(class_names[static_cast<std::size_t>(d.label_index)]);
  d.assigned = true;
  return d;
}

struct CorpusStats {
  std::array<long long, 4> class_counts = {0, 0, 0, 0};
  long long discarded = 0;
  long long total = 0;

  void add(const LabelDecision& d) {
    ++total;
    if (d.assigned) {
      ++class_counts[static_cast<std::size_t>(d.label)];
    } else {
      ++discarded;
    }
  }
};

inline nlohmann::json stats_to_json(const CorpusStats& s) {
  nlohmann::json counts;
  for (int i = 0; i < 4; ++i) {
    counts[emotion_name(static_cast<Emotion>(i))] = s.class_counts[static_cast<std::size_t>(i)];
  }
  return nlohmann::json{{"class_counts", counts}, {"discarded", s.discarded}, {"total", s.total}};
}

inline CorpusStats stats_from_json(const nlohmann::json& j) {
  CorpusStats s;
  for (int i = 0; i < 4; ++i) {
    s.class_counts[static_cast<std::size_t>(i)] =
        j.at("class_counts").at(emotion_name(static_cast<Emotion>(i))).get<long long>();
  }
  s.discarded = j.at("discarded").get<long long>();
  s.total = j.at("total").get<long long>();
  return s;
}

}  // namespace dncshap
