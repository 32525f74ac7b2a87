#include "nst/cli.hpp"

#include <CLI11.hpp>
#include <Eigen/Core>
#include <cstdlib>
#include <iostream>

#include "nst/io.hpp"

namespace nst::cli {

namespace fs = std::filesystem;
using io::json;

namespace {

struct CommonTrainFlags {
  std::string graph_path;
  std::string out_dir;
  train::TrainConfig cfg;
  std::string geometry = "nst";
  std::string causality = "local";
  double clamp_weights = 0.0;

  void resolve() {
    cfg.geometry = baselines::parse_geometry(geometry);
    cfg.causality = causality == "global" ? train::CausalityMode::kGlobal
                                          : train::CausalityMode::kLocal;
    if (causality != "local" && causality != "global")
      throw MalformedInput("causality must be local or global");
  }
};

void add_train_flags(CLI::App* cmd, CommonTrainFlags& f) {
  cmd->add_option("--space-dim", f.cfg.space, "spatial dimensions D");
  cmd->add_option("--time-dim", f.cfg.time, "temporal dimensions T");
  cmd->add_option("--geometry", f.geometry,
                  "nst|euclidean|minkowski|desitter|snowflake-v1");
  cmd->add_option("--epochs", f.cfg.epochs, "training epochs");
  cmd->add_option("--lr", f.cfg.lr, "learning rate");
  cmd->add_option("--clip", f.cfg.clip_norm, "max gradient norm");
  cmd->add_option("--seed", f.cfg.seed, "rng seed");
  cmd->add_option("--causality", f.causality, "local|global causality loss");
  cmd->add_option("--epsilon", f.cfg.epsilon, "margin of the global no-causality term");
  cmd->add_flag("--smooth-global", f.cfg.smooth_global,
                "use steep sigmoid instead of relu in the global loss");
  cmd->add_option("--batch", f.cfg.pair_batch, "pair batch size (0 = full batch)");
  cmd->add_option("--encoder-layers", f.cfg.encoder_hidden_layers, "encoder hidden layers");
  cmd->add_option("--encoder-width", f.cfg.encoder_width, "encoder hidden width");
  cmd->add_option("--metric-depth", f.cfg.metric_depth, "quasi-metric layers J");
  cmd->add_option("--order-depth", f.cfg.order_depth, "partial-order layers J~");
  cmd->add_option("--weight-distance", f.cfg.weight_distance, "distance loss weight");
  cmd->add_option("--weight-causality", f.cfg.weight_causality, "causality loss weight");
  cmd->add_flag("--global-distance", f.cfg.global_distance,
                "train on all-pairs geodesics (tree protocol)");
  cmd->add_flag("--deterministic", f.cfg.deterministic, "serial reductions");
  cmd->add_option("--clamp-weights", f.clamp_weights,
                  "clamp loaded edge weights into [eps, 1]");
  cmd->add_option("--desitter-radius", f.cfg.desitter_radius, "De Sitter curvature radius");
}

json run_manifest(const std::string& command, const train::TrainConfig& cfg,
                  const json& extra) {
  json manifest;
  manifest["command"] = command;
  manifest["config"] = io::config_to_json(cfg);
  for (auto& [key, value] : extra.items()) manifest[key] = value;
  return manifest;
}

void emit_training_outputs(const fs::path& out, const train::TrainResult& result,
                           const train::TrainConfig& cfg, const json& manifest) {
  fs::create_directories(out);
  io::write_report(out / "report.json", result.report);
  io::write_curve_csv(out / "curve.csv", result.curve);
  io::save_checkpoint(out / "checkpoint.json", result.model, cfg);
  io::write_manifest(out / "manifest.json", manifest);
}

void print_report(const train::EmbeddingReport& report) {
  std::cout << io::report_to_json(report).dump(2) << std::endl;
}

int cmd_generate(const std::string& out_dir, int nodes, double edge_prob,
                 const std::string& metric, const std::string& tree, std::uint64_t seed) {
  if (!tree.empty() && tree != "binary" && tree != "ternary")
    throw MalformedInput("tree must be binary or ternary");
  graph::WeightedDigraph g =
      tree.empty() ? graph::generate_random_dag(nodes, edge_prob, metric, seed)
                   : graph::generate_tree(tree == "binary" ? 2 : 3, nodes, seed);
  fs::path out(out_dir);
  io::save_graph_dir(out, g);
  json extra;
  extra["nodes"] = nodes;
  extra["edge_prob"] = edge_prob;
  extra["metric"] = metric;
  extra["tree"] = tree;
  extra["seed"] = seed;
  extra["edges_written"] = g.edges().size();
  json manifest;
  manifest["command"] = "generate";
  for (auto& [key, value] : extra.items()) manifest[key] = value;
  io::write_manifest(out / "manifest.json", manifest);
  std::cout << "wrote " << g.node_count() << " nodes, " << g.edges().size() << " edges to "
            << out_dir << std::endl;
  return 0;
}

int cmd_train(CommonTrainFlags& f) {
  f.resolve();
  graph::WeightedDigraph g = io::load_graph(f.graph_path, f.clamp_weights);
  train::TrainResult result = train::train(g, f.cfg);
  json extra;
  extra["graph"] = f.graph_path;
  extra["clamp_weights"] = f.clamp_weights;
  emit_training_outputs(f.out_dir, result, f.cfg, run_manifest("train", f.cfg, extra));
  print_report(result.report);
  return 0;
}

int cmd_evaluate(const std::string& graph_path, const std::string& checkpoint,
                 const std::string& out_dir, double clamp_weights) {
  graph::WeightedDigraph g = io::load_graph(graph_path, clamp_weights);
  train::TrainConfig cfg;
  train::Model model = io::load_checkpoint(checkpoint, &cfg);
  train::EmbeddingReport report = train::evaluate(model, g, cfg);
  fs::path out(out_dir);
  fs::create_directories(out);
  io::write_report(out / "report.json", report);
  json extra;
  extra["graph"] = graph_path;
  extra["checkpoint"] = checkpoint;
  io::write_manifest(out / "manifest.json", run_manifest("evaluate", cfg, extra));
  print_report(report);
  return 0;
}

int cmd_inspect(const std::string& graph_path, double clamp_weights) {
  graph::WeightedDigraph g = io::load_graph(graph_path, clamp_weights);
  if (!graph::is_dag(g)) throw CyclicInput("inspect expects a DAG input");
  graph::Poset poset = graph::dag_to_poset(g);
  int width = graph::poset_width(poset);
  auto covers = graph::hasse_reduction(poset);
  graph::ShortestPaths sp = graph::shortest_paths(graph::UndirectedView(g));

  bool connected = true;
  for (int u = 0; u < g.node_count() && connected; ++u)
    for (int v = 0; v < g.node_count(); ++v)
      if (!sp.reachable_pair(u, v)) {
        connected = false;
        break;
      }

  std::cout << "nodes: " << g.node_count() << '\n';
  std::cout << "edges: " << g.edges().size() << '\n';
  std::cout << "width: " << width << '\n';
  std::cout << "hasse_edges: " << covers.size() << '\n';
  if (connected) {
    std::cout << "diameter: " << io::format_double(graph::diameter(sp.dist)) << '\n';
    std::cout << "separation: " << io::format_double(graph::separation(sp.dist)) << '\n';
  } else {
    std::cout << "diameter: n/a (disconnected)\n";
    std::cout << "separation: n/a (disconnected)\n";
  }
  if (connected && g.node_count() <= 16)
    std::cout << "doubling_constant: " << graph::doubling_constant_estimate(sp.dist) << '\n';
  else
    std::cout << "doubling_constant: n/a (" << (connected ? "more than 16 nodes" : "disconnected")
              << ")\n";
  std::cout << "suggested_time_dims: " << width << std::endl;
  return 0;
}

// Desk-scale synthetic-DAG protocol: 50 nodes at edge probability 0.9,
// D = T = dim, 5000 epochs at lr 1e-4 with clip 1.
int cmd_repro_table1(const std::string& out_dir, const std::string& metric, int dim, int nodes,
                     double edge_prob, int epochs, std::uint64_t seed) {
  graph::WeightedDigraph g = graph::generate_random_dag(nodes, edge_prob, metric, seed);
  train::TrainConfig cfg;
  cfg.space = dim;
  cfg.time = dim;
  cfg.epochs = epochs;
  cfg.seed = seed;
  train::TrainResult result = train::train(g, cfg);
  json extra;
  extra["protocol"] = "table1";
  extra["metric"] = metric;
  extra["nodes"] = nodes;
  extra["edge_prob"] = edge_prob;
  fs::path out(out_dir);
  io::save_graph_dir(out / "graph", g);
  emit_training_outputs(out, result, cfg, run_manifest("repro-table1", cfg, extra));
  print_report(result.report);
  return 0;
}

// Desk-scale tree protocol: global geodesic targets, distance-only training,
// identical budget across geometries.
int cmd_repro_tree(const std::string& out_dir, int branching, int nodes, int dim,
                   const std::string& geometry, int epochs, double lr, std::uint64_t seed) {
  graph::WeightedDigraph g = graph::generate_tree(branching, nodes, seed);
  train::TrainConfig cfg;
  cfg.geometry = baselines::parse_geometry(geometry);
  cfg.space = dim;
  cfg.time = 0;
  cfg.global_distance = true;
  cfg.epochs = epochs;
  cfg.lr = lr;
  cfg.seed = seed;
  train::TrainResult result = train::train(g, cfg);
  json extra;
  extra["protocol"] = "tree";
  extra["branching"] = branching;
  extra["nodes"] = nodes;
  fs::path out(out_dir);
  io::save_graph_dir(out / "graph", g);
  emit_training_outputs(out, result, cfg, run_manifest("repro-tree", cfg, extra));
  print_report(result.report);
  return 0;
}

}  // namespace

int run(int argc, const char* const* argv) {
  if (const char* threads = std::getenv("NST_THREADS"))
    Eigen::setNbThreads(std::max(1, std::atoi(threads)));
  else
    Eigen::setNbThreads(1);

  CLI::App app{"neural spacetime embeddings of weighted DAGs"};
  app.require_subcommand(1);

  // generate
  std::string gen_out, gen_metric = "m1", gen_tree;
  int gen_nodes = 50;
  double gen_prob = 0.9;
  std::uint64_t gen_seed = 0;
  CLI::App* generate = app.add_subcommand("generate", "write a synthetic DAG or tree");
  generate->add_option("--out", gen_out, "output directory")->required();
  generate->add_option("--nodes", gen_nodes, "node count");
  generate->add_option("--edge-prob", gen_prob, "edge probability");
  generate->add_option("--metric", gen_metric, "synthetic metric m1..m5");
  generate->add_option("--tree", gen_tree, "binary|ternary tree instead of a DAG");
  generate->add_option("--seed", gen_seed, "rng seed");

  // train
  CommonTrainFlags train_flags;
  CLI::App* train_cmd = app.add_subcommand("train", "train an embedding on a graph");
  train_cmd->add_option("--graph", train_flags.graph_path, "graph directory or edge list")
      ->required();
  train_cmd->add_option("--out", train_flags.out_dir, "output directory")->required();
  add_train_flags(train_cmd, train_flags);

  // evaluate
  std::string eval_graph, eval_checkpoint, eval_out;
  double eval_clamp = 0.0;
  CLI::App* evaluate = app.add_subcommand("evaluate", "evaluate a checkpoint on a graph");
  evaluate->add_option("--graph", eval_graph, "graph directory or edge list")->required();
  evaluate->add_option("--checkpoint", eval_checkpoint, "checkpoint json")->required();
  evaluate->add_option("--out", eval_out, "output directory")->required();
  evaluate->add_option("--clamp-weights", eval_clamp, "clamp loaded weights into [eps, 1]");

  // inspect
  std::string inspect_graph;
  double inspect_clamp = 0.0;
  CLI::App* inspect = app.add_subcommand("inspect", "poset facts of a DAG");
  inspect->add_option("--graph", inspect_graph, "graph directory or edge list")->required();
  inspect->add_option("--clamp-weights", inspect_clamp, "clamp loaded weights into [eps, 1]");

  // repro-table1
  std::string t1_out, t1_metric = "m1";
  int t1_dim = 10, t1_nodes = 50, t1_epochs = 5000;
  double t1_prob = 0.9;
  std::uint64_t t1_seed = 7;
  CLI::App* table1 = app.add_subcommand("repro-table1", "synthetic DAG protocol");
  table1->add_option("--out", t1_out, "output directory")->required();
  table1->add_option("--metric", t1_metric, "synthetic metric m1..m5");
  table1->add_option("--dim", t1_dim, "embedding dimension (D = T)");
  table1->add_option("--nodes", t1_nodes, "node count");
  table1->add_option("--edge-prob", t1_prob, "edge probability");
  table1->add_option("--epochs", t1_epochs, "training epochs");
  table1->add_option("--seed", t1_seed, "rng seed");

  // repro-tree
  std::string tr_out, tr_geometry = "nst";
  int tr_branching = 2, tr_nodes = 200, tr_dim = 2, tr_epochs = 1500;
  double tr_lr = 3e-3;
  std::uint64_t tr_seed = 7;
  CLI::App* tree = app.add_subcommand("repro-tree", "tree embedding protocol");
  tree->add_option("--out", tr_out, "output directory")->required();
  tree->add_option("--branching", tr_branching, "2 or 3");
  tree->add_option("--nodes", tr_nodes, "node count");
  tree->add_option("--dim", tr_dim, "embedding dimension");
  tree->add_option("--geometry", tr_geometry, "nst|euclidean|snowflake-v1");
  tree->add_option("--epochs", tr_epochs, "training epochs");
  tree->add_option("--lr", tr_lr, "learning rate");
  tree->add_option("--seed", tr_seed, "rng seed");

  try {
    app.parse(argc, argv);
    if (*generate) return cmd_generate(gen_out, gen_nodes, gen_prob, gen_metric, gen_tree, gen_seed);
    if (*train_cmd) return cmd_train(train_flags);
    if (*evaluate) return cmd_evaluate(eval_graph, eval_checkpoint, eval_out, eval_clamp);
    if (*inspect) return cmd_inspect(inspect_graph, inspect_clamp);
    if (*table1)
      return cmd_repro_table1(t1_out, t1_metric, t1_dim, t1_nodes, t1_prob, t1_epochs, t1_seed);
    if (*tree)
      return cmd_repro_tree(tr_out, tr_branching, tr_nodes, tr_dim, tr_geometry, tr_epochs,
                            tr_lr, tr_seed);
    return 0;
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const MalformedInput& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return 3;
  } catch (const ConstraintViolation& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return 2;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return 1;
  }
}

}  // namespace nst::cli
