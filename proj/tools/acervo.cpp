// acervo command line: validate, project, train, eval, attribute, serve, replay.
// Exit codes: 0 success, 1 validation failure, 2 runtime error.

#include <csignal>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "acervo/attribution.hpp"
#include "acervo/datasets.hpp"
#include "acervo/error.hpp"
#include "acervo/evaluation.hpp"
#include "acervo/hash.hpp"
#include "acervo/projection.hpp"
#include "acervo/service.hpp"
#include "acervo/train.hpp"

namespace fs = std::filesystem;
using namespace acervo;

namespace {

constexpr int kOk = 0;
constexpr int kInvalid = 1;
constexpr int kRuntime = 2;

std::string file_hash(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::io, "cannot read " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return hex64(fnv1a64(buf.str()));
}

void write_json(const Json& j, const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::io, "cannot write " + path.string());
  out << j.dump(2) << '\n';
}

struct Manifest {
  std::string command;
  std::vector<std::string> args;
  Json config;
  std::uint64_t seed = 0;
  std::vector<fs::path> inputs;
  std::vector<fs::path> outputs;

  void write(const fs::path& path) const {
    Json in = Json::object(), out = Json::object();
    for (const auto& p : inputs)
      if (!p.empty()) in[p.string()] = file_hash(p);
    for (const auto& p : outputs)
      if (!p.empty()) out[p.string()] = file_hash(p);
    Json j = {{"command", command},
              {"args", args},
              {"cwd", fs::current_path().string()},
              {"config", config},
              {"config_hash", hex64(fnv1a64(config.dump()))},
              {"seed", seed},
              {"inputs", in},
              {"outputs", out}};
    write_json(j, path);
  }
};

fs::path manifest_path(const std::string& flag, const fs::path& primary) {
  return flag.empty() ? fs::path(primary.string() + ".manifest.json") : fs::path(flag);
}

// ---- validate ---------------------------------------------------------------

struct ValidateOptions {
  std::string catalog, image, text;
};

int cmd_validate(const ValidateOptions& o) {
  if (!fs::exists(o.catalog)) throw Error(ErrorCode::io, "missing catalog file " + o.catalog);
  CatalogLoad load = load_catalog(o.catalog);
  ValidationReport& report = load.report;
  auto check = [&](const std::string& path, std::size_t& count) {
    if (path.empty()) return;
    if (!fs::exists(path)) throw Error(ErrorCode::io, "missing embedding file " + path);
    try {
      count = load_embeddings(path, load.catalog).size();
    } catch (const Error& e) {
      if (e.code() == ErrorCode::io) throw;
      report.errors.push_back({std::nullopt, 0, path + ": " + e.what()});
    }
  };
  check(o.image, report.with_image_embedding);
  check(o.text, report.with_text_embedding);
  std::cout << to_json(report).dump(2) << '\n';
  return report.accepted() ? kOk : kInvalid;
}

// ---- project ----------------------------------------------------------------

struct ProjectOptions {
  std::string catalog, embeddings, view = "semantic_image", out, material_config, manifest;
  ProjectionConfig config;
  std::string metric = "euclidean";
  std::size_t trust_k = 0;
};

int cmd_project(ProjectOptions o, const std::vector<std::string>& args) {
  o.config.metric = metric_from_string(o.metric);
  o.config.validate();
  const ViewMode view = view_mode_from_string(o.view);
  Manifest m{"project", args, to_json(o.config), o.config.seed, {}, {o.out}};
  Projection2D projection;
  std::string digest;
  if (view == ViewMode::material) {
    if (o.catalog.empty() || o.material_config.empty())
      throw Error(ErrorCode::invalid_argument, "material view needs --catalog and --material-config");
    CatalogLoad load = load_catalog(o.catalog);
    if (!load.report.accepted()) throw Error(ErrorCode::invalid_argument, "catalog has errors; run validate");
    projection = material_layout(load.catalog, load_material_config(o.material_config));
    digest = file_hash(o.catalog) + file_hash(o.material_config);
    m.inputs = {o.catalog, o.material_config};
  } else {
    if (o.embeddings.empty()) throw Error(ErrorCode::invalid_argument, "--embeddings is required for " + o.view);
    EmbeddingSet emb;
    if (!o.catalog.empty()) {
      CatalogLoad load = load_catalog(o.catalog);
      emb = load_embeddings(o.embeddings, load.catalog);
      m.inputs.push_back(o.catalog);
    } else {
      emb = load_embeddings(o.embeddings);
    }
    m.inputs.push_back(o.embeddings);
    digest = file_hash(o.embeddings);
    projection = project_embeddings(emb, o.config, view);
    if (o.trust_k > 0) {
      const double t = trustworthiness(emb, projection, o.trust_k, o.config.metric);
      std::cerr << "trustworthiness(k=" << o.trust_k << ") = " << t << '\n';
    }
  }
  m.config["view"] = o.view;
  save_projection(projection, projection_config_hash(o.config, view, digest), o.out);
  m.write(manifest_path(o.manifest, o.out));
  std::cerr << "wrote " << projection.size() << " points to " << o.out << '\n';
  return kOk;
}

// ---- train ------------------------------------------------------------------

struct TrainOptions {
  std::string embeddings, catalog, regime = "info_nce", out, history, triplets, manifest;
  std::vector<std::string> attributes, head_weights;
  std::string rebalance = "none";
  std::size_t min_samples = 20, filter_threshold = 5;
  std::string head = "two_layer";
  std::size_t hidden = 256, output_dim = 128;
  std::optional<std::uint64_t> init_seed;
  TrainingConfig config;
};

int cmd_train(TrainOptions o, const std::vector<std::string>& args) {
  for (const auto& hw : o.head_weights) {
    const auto eq = hw.find('=');
    if (eq == std::string::npos) throw Error(ErrorCode::invalid_argument, "--head-weight expects name=value");
    o.config.head_weights[hw.substr(0, eq)] = std::stod(hw.substr(eq + 1));
  }
  const Regime regime = regime_from_string(o.regime);
  Manifest m{"train", args, to_json(o.config), o.config.seed, {o.embeddings}, {o.out}};
  m.config["regime"] = o.regime;
  m.config["head"] = {{"kind", o.head}, {"hidden", o.hidden}, {"output_dim", o.output_dim}};

  std::optional<Catalog> catalog;
  if (!o.catalog.empty()) {
    CatalogLoad load = load_catalog(o.catalog);
    if (!load.report.accepted()) throw Error(ErrorCode::invalid_argument, "catalog has errors; run validate");
    catalog = std::move(load.catalog);
    m.inputs.push_back(o.catalog);
  }
  const EmbeddingSet emb = catalog ? load_embeddings(o.embeddings, *catalog) : load_embeddings(o.embeddings);
  const std::uint64_t init_seed = o.init_seed.value_or(o.config.seed);
  HeadModel model = make_head(head_kind_from_string(o.head), emb.dim(), o.hidden, o.output_dim, init_seed);

  TrainingData data;
  switch (regime) {
    case Regime::nt_xent:
      data = NtXentData{{emb.ids().begin(), emb.ids().end()}};
      break;
    case Regime::info_nce: {
      if (o.triplets.empty()) throw Error(ErrorCode::invalid_argument, "info_nce needs --triplets");
      ContrastiveTripletSet set = load_triplets(o.triplets);
      if (catalog) validate_triplets(set, *catalog);
      m.inputs.push_back(o.triplets);
      data = std::move(set);
      break;
    }
    case Regime::classification: {
      if (!catalog) throw Error(ErrorCode::invalid_argument, "classification needs --catalog");
      if (o.attributes.empty()) throw Error(ErrorCode::invalid_argument, "classification needs --attribute");
      m.config["attributes"] = o.attributes;
      m.config["rebalance"] = o.rebalance;
      ClassificationData cd;
      if (o.rebalance == "none") {
        cd = multihead_data(*catalog, emb, o.attributes, o.min_samples);
      } else {
        if (o.attributes.size() != 1)
          throw Error(ErrorCode::invalid_argument, "rebalancing takes exactly one --attribute");
        RebalanceConfig rc;
        rc.attribute = o.attributes.front();
        rc.mode = rebalance_mode_from_string(o.rebalance);
        rc.min_samples = o.min_samples;
        rc.filter_threshold = o.filter_threshold;
        rc.seed = o.config.seed;
        cd = classification_data(rebalance(*catalog, emb, rc));
      }
      for (std::size_t h = 0; h < cd.targets.size(); ++h)
        add_classifier(model, cd.targets[h].name, cd.targets[h].labels, init_seed + 1 + h);
      data = std::move(cd);
      break;
    }
  }

  TrainingResult result = train_head(o.config, regime, data, emb, std::move(model));
  save_model(result.model, training_config_hash(o.config, regime), o.out);
  if (!o.history.empty()) {
    save_history_csv(result.history, o.history);
    m.outputs.push_back(o.history);
  }
  m.write(manifest_path(o.manifest, o.out));
  std::cerr << "trained " << result.history.size() << " epochs, best epoch " << result.best_epoch
            << ", best val loss " << result.history.at(result.best_epoch - 1).val_loss << '\n';
  return kOk;
}

// ---- eval -------------------------------------------------------------------

struct EvalOptions {
  std::string embeddings, model, pairs, in_context, catalog, classifier, out, manifest;
};

ScoredPairSet load_in_context(const fs::path& path, const EmbeddingSet& emb) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::io, "cannot open " + path.string());
  std::vector<InContextAnchor> anchors;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || (line_no == 1 && line.rfind("anchor", 0) == 0)) continue;
    std::stringstream ss(line);
    std::string a, p, n;
    std::getline(ss, a, ',');
    std::getline(ss, p, ',');
    std::getline(ss, n, ',');
    InContextAnchor anchor;
    try {
      anchor.anchor = std::stoull(a);
      if (!p.empty()) anchor.positive = std::stoull(p);
      if (!n.empty()) anchor.negative = std::stoull(n);
    } catch (const std::exception&) {
      throw Error(ErrorCode::parse, path.string() + " line " + std::to_string(line_no) + ": bad id");
    }
    anchors.push_back(anchor);
  }
  return build_in_context_sts(std::move(anchors), &emb);
}

int cmd_eval(const EvalOptions& o, const std::vector<std::string>& args) {
  Manifest m{"eval", args, Json::object(), 0, {o.embeddings}, {}};
  std::optional<HeadModel> model;
  if (!o.model.empty()) {
    model = load_model(o.model);
    m.inputs.push_back(o.model);
  }
  const EmbeddingSet emb = load_embeddings(o.embeddings);
  Json report = Json::object();
  const HeadModel* head = model ? &*model : nullptr;
  if (!o.pairs.empty()) {
    const ScoredPairSet pairs = load_scored_pairs(o.pairs);
    report["sts"] = {{"pearson", sts_score(head, pairs, emb)}, {"pairs", pairs.records.size()}};
    m.inputs.push_back(o.pairs);
  }
  if (!o.in_context.empty()) {
    const ScoredPairSet pairs = load_in_context(o.in_context, emb);
    report["in_context_sts"] = {{"pearson", sts_score(head, pairs, emb)}, {"pairs", pairs.records.size()}};
    m.inputs.push_back(o.in_context);
  }
  if (!o.classifier.empty()) {
    if (!model || o.catalog.empty())
      throw Error(ErrorCode::invalid_argument, "--classifier needs --model and --catalog");
    const auto* c = model->classifier(o.classifier);
    if (!c) throw Error(ErrorCode::not_found, "model has no classifier '" + o.classifier + "'");
    CatalogLoad load = load_catalog(o.catalog);
    m.inputs.push_back(o.catalog);
    const auto index = static_cast<std::size_t>(c - model->classifiers.data());
    std::vector<std::string> predictions, gold;
    for (ItemId id : emb.ids()) {
      const Item* item = load.catalog.find(id);
      if (!item) continue;
      const auto& label = label_attribute(*item, o.classifier);
      if (!label) continue;
      const auto logits = head_forward(*model, emb.row_as_double(id)).logits[index];
      predictions.push_back(c->labels[static_cast<std::size_t>(
          std::max_element(logits.begin(), logits.end()) - logits.begin())]);
      gold.push_back(*label);
    }
    const std::set<std::string> selected(c->labels.begin(), c->labels.end());
    std::set<std::string> present(selected);
    std::set<std::string> space(gold.begin(), gold.end());
    space.insert(predictions.begin(), predictions.end());
    std::erase_if(present, [&](const std::string& s) { return !space.contains(s); });
    report["classification"] = to_json(classification_metrics(predictions, gold, present));
  }
  if (report.empty()) throw Error(ErrorCode::invalid_argument, "nothing to evaluate: pass --pairs, --in-context or --classifier");
  const Json out = rounded(report);
  std::cout << out.dump(2) << '\n';
  if (!o.out.empty()) {
    write_json(out, o.out);
    m.outputs.push_back(o.out);
    m.write(manifest_path(o.manifest, o.out));
  }
  return kOk;
}

// ---- attribute --------------------------------------------------------------

struct AttributeOptions {
  std::string embeddings, model, groups, out, manifest;
  ItemId id = 0, ref = 0;
  std::size_t steps = 256;
};

int cmd_attribute(const AttributeOptions& o, const std::vector<std::string>& args) {
  const EmbeddingSet emb = load_embeddings(o.embeddings);
  const HeadModel model = load_model(o.model);
  AttributionConfig config;
  config.steps = o.steps;
  config.reference = head_forward(model, emb.row_as_double(o.ref)).output;
  const AttributionResult result = integrated_gradients(model, emb.row_as_double(o.id), config);
  Manifest m{"attribute", args, {{"id", o.id}, {"ref", o.ref}, {"steps", o.steps}}, 0, {o.embeddings, o.model}, {}};
  Json report;
  if (!o.groups.empty()) {
    std::ifstream in(o.groups);
    if (!in) throw Error(ErrorCode::io, "cannot open " + o.groups);
    std::map<std::size_t, std::string> segmentation;
    const Json spec = Json::parse(in);
    for (const auto& [group, indices] : spec.items())
      for (std::size_t i : indices.get<std::vector<std::size_t>>()) segmentation[i] = group;
    const auto groups = group_attributions(result, segmentation);
    report = attribution_report(result, &groups);
    m.inputs.push_back(o.groups);
  } else {
    report = attribution_report(result);
  }
  report["id"] = o.id;
  report["ref"] = o.ref;
  report = rounded(report);
  if (o.out.empty()) {
    std::cout << report.dump(2) << '\n';
  } else {
    write_json(report, o.out);
    m.outputs.push_back(o.out);
    m.write(manifest_path(o.manifest, o.out));
  }
  std::cerr << "residual " << result.residual << " over " << result.steps << " steps\n";
  return kOk;
}

// ---- serve ------------------------------------------------------------------

struct ServeOptions {
  std::string service;
  std::optional<std::string> host;
  std::optional<int> port;
};

int cmd_serve(const ServeOptions& o) {
  ServiceConfig config = load_service_config(o.service);
  if (o.host) config.settings.host = *o.host;
  if (o.port) config.settings.port = *o.port;
  ExplorerService service(load_service_data(config), config.settings);
  HttpServer server(service, config.settings.cors_allow);

  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);

  const int port = server.bind(config.settings.host, config.settings.port);
  std::cerr << "listening on " << config.settings.host << ':' << port << " (catalog " << service.catalog_hash()
            << ")\n";
  std::thread waiter([&] {
    int sig = 0;
    sigwait(&signals, &sig);
    std::cerr << "shutting down\n";
    server.stop();
  });
  server.serve();
  if (waiter.joinable()) {
    // serve() only returns after stop(), which the waiter issued.
    waiter.join();
  }
  return kOk;
}

int run(std::vector<std::string> args);

// ---- replay -----------------------------------------------------------------

int cmd_replay(const std::string& manifest_file) {
  std::ifstream in(manifest_file);
  if (!in) throw Error(ErrorCode::io, "cannot open manifest " + manifest_file);
  const Json manifest = Json::parse(in);
  const auto args = manifest.at("args").get<std::vector<std::string>>();
  const fs::path cwd = fs::current_path();
  fs::current_path(manifest.at("cwd").get<std::string>());
  const int code = run(args);
  int status = code;
  if (code == kOk) {
    for (const auto& [path, hash] : manifest.at("outputs").items()) {
      const std::string now = file_hash(path);
      if (now != hash.get<std::string>()) {
        std::cerr << "replay mismatch: " << path << " " << now << " != " << hash.get<std::string>() << '\n';
        status = kInvalid;
      }
    }
    if (status == kOk) std::cerr << "replay reproduced " << manifest.at("outputs").size() << " artifacts\n";
  }
  fs::current_path(cwd);
  return status;
}

int run(std::vector<std::string> args) {
  CLI::App app{"acervo: embedding-space exploration engine for cultural collections"};
  app.set_config("--config", "", "TOML config file; command line flags take precedence");
  app.require_subcommand(1);

  ValidateOptions vo;
  auto* validate = app.add_subcommand("validate", "Check a catalog and its embedding files");
  validate->add_option("--catalog", vo.catalog, "Catalog JSON-lines file")->required();
  validate->add_option("--image-embeddings", vo.image, "Image embedding file");
  validate->add_option("--text-embeddings", vo.text, "Text embedding file");

  ProjectOptions po;
  auto* project = app.add_subcommand("project", "Build a 2D projection cache");
  project->add_option("--catalog", po.catalog, "Catalog file (required for the material view)");
  project->add_option("--embeddings", po.embeddings, "Embedding file");
  project->add_option("--view", po.view, "semantic_image, semantic_text or material")->capture_default_str();
  project->add_option("--out", po.out, "Projection cache output")->required();
  project->add_option("--material-config", po.material_config, "Triangle vertices and label mapping (JSON)");
  project->add_option("--n-neighbors", po.config.n_neighbors, "k of the neighbour graph")->capture_default_str();
  project->add_option("--min-dist", po.config.min_dist, "Minimum embedded distance")->capture_default_str();
  project->add_option("--spread", po.config.spread, "Embedded scale")->capture_default_str();
  project->add_option("--epochs", po.config.n_epochs, "Layout epochs")->capture_default_str();
  project->add_option("--negative-rate", po.config.negative_sample_rate, "Negative samples per edge")
      ->capture_default_str();
  project->add_option("--learning-rate", po.config.initial_learning_rate, "Initial layout learning rate")
      ->capture_default_str();
  project->add_option("--seed", po.config.seed, "Random seed")->capture_default_str();
  project->add_option("--metric", po.metric, "euclidean or cosine")->capture_default_str();
  project->add_option("--trust-k", po.trust_k, "Report trustworthiness at this k (0 = skip)");
  project->add_option("--manifest", po.manifest, "Manifest path (default <out>.manifest.json)");

  TrainOptions to;
  auto* train = app.add_subcommand("train", "Train a head over frozen embeddings");
  train->add_option("--embeddings", to.embeddings, "Embedding file")->required();
  train->add_option("--catalog", to.catalog, "Catalog file (labels, triplet checks)");
  train->add_option("--regime", to.regime, "nt_xent, info_nce or classification")->capture_default_str();
  train->add_option("--out", to.out, "Model output file")->required();
  train->add_option("--history", to.history, "Per-epoch history CSV");
  train->add_option("--triplets", to.triplets, "Triplet CSV for info_nce");
  train->add_option("--attribute", to.attributes, "Classification target (repeatable): categoria, povo");
  train->add_option("--rebalance", to.rebalance, "none, filter_only, augment or filter_and_augment")
      ->capture_default_str();
  train->add_option("--min-samples", to.min_samples, "Rebalancing target per class")->capture_default_str();
  train->add_option("--filter-threshold", to.filter_threshold, "Drop classes below this (filter_and_augment)")
      ->capture_default_str();
  train->add_option("--head", to.head, "linear or two_layer")->capture_default_str();
  train->add_option("--hidden", to.hidden, "Hidden width (two_layer)")->capture_default_str();
  train->add_option("--output-dim", to.output_dim, "Projected dimension")->capture_default_str();
  train->add_option("--init-seed", to.init_seed, "Weight init seed (default --seed)");
  train->add_option("--tau", to.config.temperature, "Softmax temperature")->capture_default_str();
  train->add_option("--lr", to.config.learning_rate, "Learning rate")->capture_default_str();
  train->add_option("--weight-decay", to.config.weight_decay, "Decoupled weight decay")->capture_default_str();
  train->add_option("--epochs", to.config.epochs, "Maximum epochs")->capture_default_str();
  train->add_option("--batch-size", to.config.batch_size, "Batch size")->capture_default_str();
  train->add_option("--dropout", to.config.dropout_rate, "Input dropout rate")->capture_default_str();
  train->add_option("--seed", to.config.seed, "Random seed")->capture_default_str();
  train->add_option("--patience", to.config.early_stop_patience, "Early stopping patience (0 = off)")
      ->capture_default_str();
  train->add_option("--head-weight", to.head_weights, "Classifier weight name=value (repeatable)");
  train->add_option("--manifest", to.manifest, "Manifest path (default <out>.manifest.json)");

  EvalOptions eo;
  auto* eval = app.add_subcommand("eval", "Evaluate embeddings or a head");
  eval->add_option("--embeddings", eo.embeddings, "Embedding file")->required();
  eval->add_option("--model", eo.model, "Head model (default identity)");
  eval->add_option("--pairs", eo.pairs, "Scored pair CSV left_id,right_id,gold");
  eval->add_option("--in-context", eo.in_context, "CSV anchor,positive,negative");
  eval->add_option("--catalog", eo.catalog, "Catalog for classification labels");
  eval->add_option("--classifier", eo.classifier, "Classifier head to score");
  eval->add_option("--out", eo.out, "Report JSON output");
  eval->add_option("--manifest", eo.manifest, "Manifest path (default <out>.manifest.json)");

  AttributeOptions ao;
  auto* attribute = app.add_subcommand("attribute", "Integrated gradients toward a reference item");
  attribute->add_option("--embeddings", ao.embeddings, "Embedding file")->required();
  attribute->add_option("--model", ao.model, "Head model")->required();
  attribute->add_option("--id", ao.id, "Item to explain")->required();
  attribute->add_option("--ref", ao.ref, "Reference item")->required();
  attribute->add_option("--steps", ao.steps, "Riemann steps")->capture_default_str();
  attribute->add_option("--groups", ao.groups, "JSON {group: [feature indices]}");
  attribute->add_option("--out", ao.out, "Report JSON output");
  attribute->add_option("--manifest", ao.manifest, "Manifest path (default <out>.manifest.json)");

  ServeOptions so;
  auto* serve = app.add_subcommand("serve", "Run the HTTP API");
  serve->add_option("--service", so.service, "Service config JSON")->required();
  serve->add_option("--host", so.host, "Listen address override");
  serve->add_option("--port", so.port, "Listen port override");

  std::string replay_manifest;
  auto* replay = app.add_subcommand("replay", "Re-run a manifest and compare artifact hashes");
  replay->add_option("manifest", replay_manifest, "Manifest JSON")->required();

  const std::vector<std::string> recorded = args;
  std::reverse(args.begin(), args.end());
  try {
    app.parse(args);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kRuntime;
  }

  try {
    if (validate->parsed()) return cmd_validate(vo);
    if (project->parsed()) return cmd_project(po, recorded);
    if (train->parsed()) return cmd_train(to, recorded);
    if (eval->parsed()) return cmd_eval(eo, recorded);
    if (attribute->parsed()) return cmd_attribute(ao, recorded);
    if (serve->parsed()) return cmd_serve(so);
    if (replay->parsed()) return cmd_replay(replay_manifest);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kRuntime;
  }
  return kRuntime;
}

}  // namespace

int main(int argc, char** argv) {
  return run(std::vector<std::string>(argv + 1, argv + argc));
}
