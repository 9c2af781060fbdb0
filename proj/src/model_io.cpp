#include "pairdbn/model_io.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "pairdbn/error.hpp"

namespace pairdbn {

namespace {

using Json = nlohmann::ordered_json;

constexpr const char* kFormatName = "pairdbn-model";

Json to_json(const Vector& v) {
  Json out = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

Json to_json(const Matrix& m) {
  Json out = Json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    Json row = Json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    out.push_back(std::move(row));
  }
  return out;
}

Vector vector_from(const Json& j, Eigen::Index expected) {
  if (!j.is_array() || static_cast<Eigen::Index>(j.size()) != expected) {
    throw DataError("model file: vector of length " + std::to_string(expected) + " expected");
  }
  Vector v(expected);
  for (Eigen::Index i = 0; i < expected; ++i) v[i] = j[static_cast<std::size_t>(i)].get<double>();
  return v;
}

Matrix matrix_from(const Json& j, Eigen::Index n) {
  if (!j.is_array() || static_cast<Eigen::Index>(j.size()) != n) {
    throw DataError("model file: " + std::to_string(n) + "x" + std::to_string(n) + " matrix expected");
  }
  Matrix m(n, n);
  for (Eigen::Index r = 0; r < n; ++r) m.row(r) = vector_from(j[static_cast<std::size_t>(r)], n).transpose();
  return m;
}

}  // namespace

std::string serialize_model(const DbnModel& model) {
  Json doc;
  doc["format"] = kFormatName;
  doc["version"] = DbnModel::kFormatVersion;
  doc["vehicle_id"] = model.vehicle_id;
  doc["combination"] = {{"name", model.combination.name}, {"channels", model.combination.channels}};
  doc["order"] = model.order;
  doc["control_gain"] = model.control_gain;
  doc["normalization"] = {{"min", model.normalization.min}, {"max", model.normalization.max}};

  Json letters = Json::array();
  for (const auto& set : model.letters) {
    Json nodes = Json::array();
    for (const auto& node : set) {
      std::vector<int> neighbors;
      for (const auto& e : node.edges) neighbors.push_back(e.neighbor);
      std::sort(neighbors.begin(), neighbors.end());
      nodes.push_back({{"id", node.id}, {"centroid", to_json(node.centroid)}, {"neighbors", neighbors}});
    }
    letters.push_back(std::move(nodes));
  }
  doc["letters"] = std::move(letters);
  doc["dictionary_size"] = model.dictionary_size();

  Json counts = Json::array();
  for (const auto& e : model.transitions.nonzero_counts()) counts.push_back({e.from, e.to, e.count});
  doc["transitions"] = {{"smoothing", model.transitions.smoothing()}, {"counts", std::move(counts)}};

  Json words = Json::array();
  for (std::size_t w = 0; w < model.words.size(); ++w) {
    const auto& stats = model.words[w];
    if (stats.count == 0) continue;
    words.push_back({{"index", w},
                     {"count", stats.count},
                     {"mean_derivative", to_json(stats.mean_derivative)},
                     {"covariance", to_json(stats.covariance)}});
  }
  doc["words"] = std::move(words);
  doc["fallback_covariance"] = to_json(model.fallback_covariance);
  doc["process_noise"] = to_json(model.process_noise);
  doc["measurement_noise"] = to_json(model.measurement_noise);
  return doc.dump(1) + "\n";
}

DbnModel parse_model(const std::string& text) {
  Json doc;
  try {
    doc = Json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("model file: ") + e.what());
  }
  try {
    if (doc.value("format", "") != kFormatName) throw DataError("model file: not a pairdbn model");
    const int version = doc.at("version").get<int>();
    if (version != DbnModel::kFormatVersion) {
      throw DataError("model file: unsupported version " + std::to_string(version));
    }
    DbnModel model;
    model.vehicle_id = doc.at("vehicle_id").get<std::string>();
    model.combination.name = doc.at("combination").at("name").get<std::string>();
    model.combination.channels = doc.at("combination").at("channels").get<std::vector<std::string>>();
    model.order = doc.at("order").get<int>();
    if (model.order != 1) throw DataError("model file: only order 1 is supported");
    model.control_gain = doc.at("control_gain").get<double>();
    model.normalization.channels = model.combination.channels;
    model.normalization.min = doc.at("normalization").at("min").get<std::vector<double>>();
    model.normalization.max = doc.at("normalization").at("max").get<std::vector<double>>();

    const auto j = static_cast<Eigen::Index>(model.channels());
    if (model.normalization.min.size() != model.channels() ||
        model.normalization.max.size() != model.channels()) {
      throw DataError("model file: normalization does not match channel count");
    }
    for (const auto& set : doc.at("letters")) {
      std::vector<GngNode> nodes;
      for (const auto& n : set) {
        GngNode node;
        node.id = n.at("id").get<int>();
        node.centroid = vector_from(n.at("centroid"), j);
        for (const int neighbor : n.at("neighbors").get<std::vector<int>>()) {
          node.edges.push_back({neighbor, 0});
        }
        nodes.push_back(std::move(node));
      }
      model.letters.push_back(std::move(nodes));
    }
    if (model.letters.size() != static_cast<std::size_t>(model.order + 1)) {
      throw DataError("model file: expected one letter set per derivative order");
    }
    const std::size_t dictionary = model.dictionary_size();
    if (doc.at("dictionary_size").get<std::size_t>() != dictionary) {
      throw DataError("model file: dictionary size does not match letter sets");
    }

    const auto& transitions = doc.at("transitions");
    model.transitions = TransitionMatrix(dictionary, transitions.at("smoothing").get<double>());
    for (const auto& e : transitions.at("counts")) {
      model.transitions.add_count(e.at(0).get<std::size_t>(), e.at(1).get<std::size_t>(),
                                  e.at(2).get<double>());
    }
    model.transitions.finalize();

    const Eigen::Index n = 2 * j;
    model.fallback_covariance = matrix_from(doc.at("fallback_covariance"), n);
    model.process_noise = matrix_from(doc.at("process_noise"), n);
    model.measurement_noise = matrix_from(doc.at("measurement_noise"), j);

    model.words.resize(dictionary);
    for (std::size_t w = 0; w < dictionary; ++w) {
      model.words[w].mean_derivative = model.word_centroid(w).tail(j);
      model.words[w].covariance = model.fallback_covariance;
    }
    for (const auto& entry : doc.at("words")) {
      const auto w = entry.at("index").get<std::size_t>();
      if (w >= dictionary) throw DataError("model file: word index out of range");
      auto& stats = model.words[w];
      stats.count = entry.at("count").get<std::size_t>();
      stats.mean_derivative = vector_from(entry.at("mean_derivative"), j);
      stats.covariance = matrix_from(entry.at("covariance"), n);
    }
    return model;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("model file: ") + e.what());
  }
}

void save_model(const DbnModel& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write model file " + path.string());
  out << serialize_model(model);
}

DbnModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open model file " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_model(buffer.str());
}

}  // namespace pairdbn
