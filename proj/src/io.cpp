#include "nst/io.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace nst::io {

namespace fs = std::filesystem;
using graph::Edge;
using graph::WeightedDigraph;

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string hex_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%a", v);
  return buf;
}

double parse_double(const std::string& s) {
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  if (s == "inf") return std::numeric_limits<double>::infinity();
  char* end = nullptr;
  double v = std::strtod(s.c_str(), &end);
  if (end == s.c_str()) throw IoError("cannot parse number: " + s);
  return v;
}

std::string read_text_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

void write_text_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
}

void write_edge_list(const fs::path& path, const WeightedDigraph& g) {
  std::ostringstream out;
  for (const Edge& e : g.edges()) out << e.u << '\t' << e.v << '\t' << format_double(e.w) << '\n';
  write_text_file(path, out.str());
}

std::vector<Edge> read_edge_list(const fs::path& path) {
  std::istringstream in(read_text_file(path));
  std::vector<Edge> edges;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream row(line);
    Edge e;
    std::string w;
    if (!(row >> e.u >> e.v >> w))
      throw IoError(path.string() + ": malformed edge at line " + std::to_string(line_no));
    e.w = parse_double(w);
    edges.push_back(e);
  }
  return edges;
}

void write_features_csv(const fs::path& path, const Mat& features) {
  std::ostringstream out;
  for (int r = 0; r < features.rows(); ++r) {
    for (int c = 0; c < features.cols(); ++c) {
      if (c) out << ',';
      out << format_double(features(r, c));
    }
    out << '\n';
  }
  write_text_file(path, out.str());
}

Mat read_features_csv(const fs::path& path) {
  std::istringstream in(read_text_file(path));
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    std::istringstream cells(line);
    std::string cell;
    while (std::getline(cells, cell, ',')) row.push_back(parse_double(cell));
    if (!rows.empty() && rows.front().size() != row.size())
      throw IoError(path.string() + ": ragged feature rows");
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw IoError(path.string() + ": empty feature file");
  Mat out(static_cast<int>(rows.size()), static_cast<int>(rows.front().size()));
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 0; c < rows.front().size(); ++c)
      out(static_cast<int>(r), static_cast<int>(c)) = rows[r][c];
  return out;
}

json graph_to_json(const WeightedDigraph& g) {
  json j;
  j["node_count"] = g.node_count();
  json feats = json::array();
  for (int r = 0; r < g.node_count(); ++r) {
    json row = json::array();
    for (int c = 0; c < g.feature_dim(); ++c) row.push_back(g.features()(r, c));
    feats.push_back(std::move(row));
  }
  j["features"] = std::move(feats);
  json edges = json::array();
  for (const Edge& e : g.edges()) edges.push_back({e.u, e.v, e.w});
  j["edges"] = std::move(edges);
  json adjacency = json::array();
  json distances = json::array();
  for (int r = 0; r < g.node_count(); ++r) {
    json arow = json::array();
    json drow = json::array();
    for (int c = 0; c < g.node_count(); ++c) {
      arow.push_back(g.adjacency()(r, c));
      // Distances are only defined on the adjacency mask; absent elsewhere.
      if (g.adjacency()(r, c))
        drow.push_back(g.distance_matrix()(r, c));
      else
        drow.push_back(nullptr);
    }
    adjacency.push_back(std::move(arow));
    distances.push_back(std::move(drow));
  }
  j["adjacency"] = std::move(adjacency);
  j["distances"] = std::move(distances);
  return j;
}

void write_graph_json(const fs::path& path, const WeightedDigraph& g) {
  write_text_file(path, graph_to_json(g).dump(2) + "\n");
}

void save_graph_dir(const fs::path& dir, const WeightedDigraph& g) {
  fs::create_directories(dir);
  write_edge_list(dir / "edges.tsv", g);
  write_features_csv(dir / "features.csv", g.features());
  write_graph_json(dir / "graph.json", g);
}

WeightedDigraph load_graph(const fs::path& path, double clamp_weights) {
  fs::path edge_path = path;
  fs::path feature_path;
  if (fs::is_directory(path)) {
    edge_path = path / "edges.tsv";
    feature_path = path / "features.csv";
  } else {
    feature_path = path.parent_path() / "features.csv";
  }
  if (!fs::exists(edge_path)) throw IoError("missing edge list: " + edge_path.string());
  std::vector<Edge> edges = read_edge_list(edge_path);
  if (clamp_weights > 0.0)
    for (Edge& e : edges) e.w = std::min(std::max(e.w, clamp_weights), 1.0);

  if (fs::exists(feature_path)) {
    Mat features = read_features_csv(feature_path);
    int node_count = static_cast<int>(features.rows());
    return WeightedDigraph(node_count, std::move(features), std::move(edges));
  }
  int max_node = -1;
  for (const Edge& e : edges) max_node = std::max({max_node, e.u, e.v});
  if (max_node < 0) throw IoError("edge list is empty and no feature file is present");
  return WeightedDigraph::without_features(max_node + 1, std::move(edges));
}

json config_to_json(const train::TrainConfig& cfg) {
  json j;
  j["space_dim"] = cfg.space;
  j["time_dim"] = cfg.time;
  j["encoder_hidden_layers"] = cfg.encoder_hidden_layers;
  j["encoder_width"] = cfg.encoder_width;
  j["metric_depth"] = cfg.metric_depth;
  j["order_depth"] = cfg.order_depth;
  j["lr"] = cfg.lr;
  j["epochs"] = cfg.epochs;
  j["clip"] = cfg.clip_norm;
  j["seed"] = cfg.seed;
  j["pair_batch"] = cfg.pair_batch;
  j["geometry"] = baselines::geometry_name(cfg.geometry);
  j["causality"] = cfg.causality == train::CausalityMode::kLocal ? "local" : "global";
  j["epsilon"] = cfg.epsilon;
  j["smooth_global"] = cfg.smooth_global;
  j["weight_distance"] = cfg.weight_distance;
  j["weight_causality"] = cfg.weight_causality;
  j["global_distance"] = cfg.global_distance;
  j["deterministic"] = cfg.deterministic;
  j["desitter_radius"] = cfg.desitter_radius;
  return j;
}

train::TrainConfig config_from_json(const json& j) {
  train::TrainConfig cfg;
  cfg.space = j.at("space_dim").get<int>();
  cfg.time = j.at("time_dim").get<int>();
  cfg.encoder_hidden_layers = j.at("encoder_hidden_layers").get<int>();
  cfg.encoder_width = j.at("encoder_width").get<int>();
  cfg.metric_depth = j.at("metric_depth").get<int>();
  cfg.order_depth = j.at("order_depth").get<int>();
  cfg.lr = j.at("lr").get<double>();
  cfg.epochs = j.at("epochs").get<int>();
  cfg.clip_norm = j.at("clip").get<double>();
  cfg.seed = j.at("seed").get<std::uint64_t>();
  cfg.pair_batch = j.at("pair_batch").get<int>();
  cfg.geometry = baselines::parse_geometry(j.at("geometry").get<std::string>());
  cfg.causality = j.at("causality").get<std::string>() == "global"
                      ? train::CausalityMode::kGlobal
                      : train::CausalityMode::kLocal;
  cfg.epsilon = j.at("epsilon").get<double>();
  cfg.smooth_global = j.at("smooth_global").get<bool>();
  cfg.weight_distance = j.at("weight_distance").get<double>();
  cfg.weight_causality = j.at("weight_causality").get<double>();
  cfg.global_distance = j.at("global_distance").get<bool>();
  cfg.deterministic = j.at("deterministic").get<bool>();
  cfg.desitter_radius = j.at("desitter_radius").get<double>();
  return cfg;
}

namespace {

json param_to_json(const ad::Param& p) {
  json j;
  j["name"] = p.name;
  j["rows"] = p.value.rows();
  j["cols"] = p.value.cols();
  j["lower_bound"] = std::isfinite(p.lower_bound) ? hex_double(p.lower_bound)
                                                  : std::string("-inf");
  json data = json::array();
  for (int r = 0; r < p.value.rows(); ++r)
    for (int c = 0; c < p.value.cols(); ++c) data.push_back(hex_double(p.value(r, c)));
  j["data"] = std::move(data);
  return j;
}

void param_from_json(const json& j, ad::Param& p) {
  if (j.at("name").get<std::string>() != p.name)
    throw IoError("checkpoint param order mismatch: expected " + p.name);
  if (j.at("rows").get<int>() != p.value.rows() || j.at("cols").get<int>() != p.value.cols())
    throw IoError("checkpoint param shape mismatch for " + p.name);
  const json& data = j.at("data");
  if (static_cast<int>(data.size()) != p.value.size())
    throw IoError("checkpoint param size mismatch for " + p.name);
  int i = 0;
  for (int r = 0; r < p.value.rows(); ++r)
    for (int c = 0; c < p.value.cols(); ++c)
      p.value(r, c) = parse_double(data[i++].get<std::string>());
  p.lower_bound = parse_double(j.at("lower_bound").get<std::string>());
}

}  // namespace

json model_to_json(const train::Model& model, const train::TrainConfig& cfg) {
  json j;
  j["format"] = "nst-checkpoint";
  j["geometry"] = baselines::geometry_name(model.geometry);
  j["seed"] = model.seed;
  j["n_features"] = model.nst.dims().n_features;
  j["config"] = config_to_json(cfg);
  json params = json::array();
  auto& mutable_model = const_cast<train::Model&>(model);
  for (ad::Param* p : mutable_model.trainable()) params.push_back(param_to_json(*p));
  j["params"] = std::move(params);
  return j;
}

train::Model model_from_json(const json& j, train::TrainConfig* cfg_out) {
  if (j.value("format", "") != "nst-checkpoint") throw IoError("not an nst checkpoint");
  train::TrainConfig cfg = config_from_json(j.at("config"));
  if (cfg_out) *cfg_out = cfg;

  spacetime::Dims dims;
  dims.n_features = j.at("n_features").get<int>();
  dims.space = cfg.space;
  dims.time = cfg.time;
  dims.encoder_hidden_layers = cfg.encoder_hidden_layers;
  dims.encoder_width = cfg.encoder_width;
  dims.metric_depth = cfg.metric_depth;
  dims.order_depth = cfg.order_depth;
  train::Model model(baselines::parse_geometry(j.at("geometry").get<std::string>()), dims,
                     cfg.desitter_radius);
  model.seed = j.at("seed").get<std::uint64_t>();

  const json& params = j.at("params");
  auto targets = model.trainable();
  if (params.size() != targets.size()) throw IoError("checkpoint param count mismatch");
  for (std::size_t i = 0; i < targets.size(); ++i) param_from_json(params[i], *targets[i]);
  return model;
}

void save_checkpoint(const fs::path& path, const train::Model& model,
                     const train::TrainConfig& cfg) {
  write_text_file(path, model_to_json(model, cfg).dump(2) + "\n");
}

train::Model load_checkpoint(const fs::path& path, train::TrainConfig* cfg_out) {
  if (!fs::exists(path)) throw IoError("missing checkpoint: " + path.string());
  json j = json::parse(read_text_file(path));
  return model_from_json(j, cfg_out);
}

namespace {

json finite_or_null(double v) {
  if (std::isfinite(v)) return v;
  return nullptr;
}

}  // namespace

json report_to_json(const train::EmbeddingReport& report) {
  json j;
  j["avg_distortion"] = finite_or_null(report.avg_distortion);
  j["std_distortion"] = finite_or_null(report.std_distortion);
  j["max_distortion"] = finite_or_null(report.max_distortion);
  j["nonfinite_pairs"] = report.nonfinite_pairs;
  j["skipped_pairs"] = report.skipped_pairs;
  j["directionality"] =
      report.directionality < 0.0 ? json(nullptr) : json(report.directionality);
  j["closure_directionality"] = report.closure_directionality < 0.0
                                    ? json(nullptr)
                                    : json(report.closure_directionality);
  j["final_distance_loss"] = finite_or_null(report.final_distance_loss);
  j["final_causality_loss"] = finite_or_null(report.final_causality_loss);
  j["wall_seconds"] = report.wall_seconds;
  json ratios = json::array();
  for (double r : report.distortion) ratios.push_back(finite_or_null(r));
  j["distortion_ratios"] = std::move(ratios);
  return j;
}

void write_report(const fs::path& path, const train::EmbeddingReport& report) {
  write_text_file(path, report_to_json(report).dump(2) + "\n");
}

void write_curve_csv(const fs::path& path, const std::vector<train::CurvePoint>& curve) {
  std::ostringstream out;
  out << "epoch,distance_loss,causality_loss,total_correct\n";
  for (const train::CurvePoint& p : curve) {
    out << p.epoch << ',' << format_double(p.distance_loss) << ','
        << format_double(p.causality_loss) << ',' << format_double(p.total_correct) << '\n';
  }
  write_text_file(path, out.str());
}

void write_manifest(const fs::path& path, const json& manifest) {
  write_text_file(path, manifest.dump(2) + "\n");
}

}  // namespace nst::io
