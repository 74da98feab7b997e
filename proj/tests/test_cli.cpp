#include <doctest.h>

#include <httplib.h>

#include <chrono>
#include <csignal>
#include <thread>

#include "acervo/attribution.hpp"
#include "acervo/json_format.hpp"
#include "acervo/projection.hpp"
#include "acervo/train.hpp"
#include "fixtures.hpp"

using namespace acervo;
namespace fs = std::filesystem;

namespace {

std::string q(const fs::path& p) { return "'" + p.string() + "'"; }

struct TaskFiles {
  fs::path dir, catalog, embeddings, triplets, pairs;
};

TaskFiles write_task(const std::string& name) {
  TaskFiles f;
  f.dir = fixtures::temp_dir(name);
  const auto task = fixtures::triplet_task(160, 12, 5);
  f.catalog = f.dir / "catalog.jsonl";
  f.embeddings = f.dir / "text.cemb";
  f.triplets = f.dir / "triplets.csv";
  f.pairs = f.dir / "pairs.csv";
  save_catalog(task.catalog, f.catalog);
  write_embeddings(task.embeddings, f.embeddings);
  save_triplets(task.triplets, f.triplets);
  save_scored_pairs(task.sts_pairs, f.pairs);
  return f;
}

std::vector<std::vector<std::string>> read_csv(const fs::path& path) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(fixtures::read_file(path));
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    rows.push_back(cells);
  }
  return rows;
}

const std::string kTrainFlags =
    " --regime info_nce --head two_layer --hidden 16 --output-dim 8 --tau 0.1 --lr 0.1 --epochs 8 "
    "--batch-size 16 --seed 3 --patience 0";

}  // namespace

TEST_CASE("validate exit codes") {
  const auto f = write_task("cli_validate");
  auto r = fixtures::run_cli("validate --catalog " + q(f.catalog) + " --text-embeddings " + q(f.embeddings));
  CHECK(r.exit_code == 0);
  const auto report = Json::parse(r.output.substr(r.output.find('{')));
  CHECK(report["errors"].empty());

  std::string text = fixtures::read_file(f.catalog);
  fixtures::write_file(f.dir / "dup.jsonl", text + text.substr(0, text.find('\n') + 1));
  r = fixtures::run_cli("validate --catalog " + q(f.dir / "dup.jsonl"));
  CHECK(r.exit_code == 1);

  fixtures::write_file(f.dir / "short.cemb", "not an embedding file");
  r = fixtures::run_cli("validate --catalog " + q(f.catalog) + " --text-embeddings " + q(f.dir / "short.cemb"));
  CHECK(r.exit_code == 1);

  CHECK(fixtures::run_cli("validate --catalog " + q(f.dir / "missing.jsonl")).exit_code == 2);
  CHECK(fixtures::run_cli("validate").exit_code == 2);
  CHECK(fixtures::run_cli("frobnicate").exit_code == 2);
  CHECK(fixtures::run_cli("--help").exit_code == 0);
}

TEST_CASE("project is byte-identical across runs") {
  const auto dir = fixtures::temp_dir("cli_project");
  const auto clusters = fixtures::gaussian_clusters(90, 8, 8.0, 4);
  write_embeddings(clusters.embeddings, dir / "img.cemb");
  const std::string base = "project --embeddings " + q(dir / "img.cemb") + " --view semantic_image --epochs 60";
  REQUIRE(fixtures::run_cli(base + " --seed 9 --out " + q(dir / "a.json")).exit_code == 0);
  REQUIRE(fixtures::run_cli(base + " --seed 9 --out " + q(dir / "b.json")).exit_code == 0);
  const std::string a = fixtures::read_file(dir / "a.json");
  CHECK_FALSE(a.empty());
  CHECK(a == fixtures::read_file(dir / "b.json"));

  std::string hash;
  const Projection2D p = load_projection(dir / "a.json", &hash);
  CHECK(p.size() == 90);
  CHECK(p.view_mode == ViewMode::semantic_image);
  CHECK_FALSE(hash.empty());
  const auto manifest = Json::parse(fixtures::read_file(dir / "a.json.manifest.json"));
  CHECK(manifest["command"] == "project");
  CHECK(manifest["seed"] == 9);
  CHECK(manifest["outputs"].size() == 1);

  REQUIRE(fixtures::run_cli(base + " --seed 10 --out " + q(dir / "c.json")).exit_code == 0);
  CHECK(fixtures::read_file(dir / "c.json") != a);

  CHECK(fixtures::run_cli(base + " --view semantic_sound --out " + q(dir / "d.json")).exit_code == 2);
  CHECK(fixtures::run_cli(base + " --min-dist 5 --spread 1 --out " + q(dir / "d.json")).exit_code == 2);
  CHECK_FALSE(fs::exists(dir / "d.json"));
}

TEST_CASE("material view from a catalog") {
  const auto dir = fixtures::temp_dir("cli_material");
  save_catalog(fixtures::random_catalog(60, 8), dir / "catalog.jsonl");
  fixtures::write_file(dir / "material.json", R"({
    "vertices": {"animal": [0, 0], "mineral": [1, 0], "vegetal": [0.5, 0.8]},
    "labels": {"pena": "animal", "argila": "mineral", "palha": "vegetal", "madeira": "vegetal",
               "semente": "vegetal", "algodão": "vegetal"}})");
  const std::string cmd = "project --view material --catalog " + q(dir / "catalog.jsonl") + " --material-config " +
                          q(dir / "material.json") + " --out " + q(dir / "m.json");
  REQUIRE(fixtures::run_cli(cmd).exit_code == 0);
  const Projection2D p = load_projection(dir / "m.json");
  CHECK(p.view_mode == ViewMode::material);
  CHECK(fixtures::run_cli("project --view material --out " + q(dir / "x.json")).exit_code == 2);
}

TEST_CASE("train writes a deterministic model and a monotone history") {
  const auto f = write_task("cli_train");
  const std::string base = "train --embeddings " + q(f.embeddings) + " --catalog " + q(f.catalog) + " --triplets " +
                           q(f.triplets) + kTrainFlags;
  auto r = fixtures::run_cli(base + " --out " + q(f.dir / "a.json") + " --history " + q(f.dir / "a.csv"));
  REQUIRE_MESSAGE(r.exit_code == 0, r.output);
  REQUIRE(fixtures::run_cli(base + " --out " + q(f.dir / "b.json") + " --history " + q(f.dir / "b.csv")).exit_code ==
          0);
  CHECK(fixtures::read_file(f.dir / "a.json") == fixtures::read_file(f.dir / "b.json"));
  CHECK(fixtures::read_file(f.dir / "a.csv") == fixtures::read_file(f.dir / "b.csv"));

  const auto rows = read_csv(f.dir / "a.csv");
  REQUIRE(rows.size() == 9);
  CHECK(rows[0][0] == "epoch");
  CHECK(rows[0][3] == "best_val_loss");
  double best = std::stod(rows[1][2]);
  for (std::size_t i = 1; i < rows.size(); ++i) {
    CHECK(std::stoi(rows[i][0]) == static_cast<int>(i));
    best = std::min(best, std::stod(rows[i][2]));
    CHECK(std::stod(rows[i][3]) == best);
  }

  const HeadModel m = load_model(f.dir / "a.json");
  CHECK(m.kind == HeadKind::two_layer);
  CHECK(m.first.out == 16);
  CHECK(m.second.out == 8);

  CHECK(fixtures::run_cli("train --embeddings " + q(f.embeddings) + " --out " + q(f.dir / "c.json") +
                          " --regime info_nce")
            .exit_code == 2);
  CHECK(fixtures::run_cli("train --embeddings " + q(f.embeddings) + " --out " + q(f.dir / "c.json") +
                          " --regime classification")
            .exit_code == 2);
}

TEST_CASE("classification training and classifier eval") {
  const auto f = write_task("cli_classify");
  const std::string model = q(f.dir / "cls.json");
  auto r = fixtures::run_cli("train --regime classification --attribute categoria --head linear --output-dim 12 "
                             "--epochs 30 --lr 0.2 --patience 0 --embeddings " +
                             q(f.embeddings) + " --catalog " + q(f.catalog) + " --out " + model);
  REQUIRE_MESSAGE(r.exit_code == 0, r.output);
  r = fixtures::run_cli("eval --embeddings " + q(f.embeddings) + " --model " + model + " --catalog " + q(f.catalog) +
                        " --classifier categoria");
  REQUIRE_MESSAGE(r.exit_code == 0, r.output);
  const auto report = Json::parse(r.output.substr(r.output.find('{')));
  CHECK(report["classification"]["accuracy"].get<double>() > 0.9);
  CHECK(fixtures::run_cli("eval --embeddings " + q(f.embeddings) + " --model " + model + " --catalog " +
                          q(f.catalog) + " --classifier povo")
            .exit_code == 2);
}

TEST_CASE("eval matches the library") {
  const auto f = write_task("cli_eval");
  REQUIRE(fixtures::run_cli("train --embeddings " + q(f.embeddings) + " --triplets " + q(f.triplets) + kTrainFlags +
                            " --out " + q(f.dir / "m.json"))
              .exit_code == 0);
  auto r = fixtures::run_cli("eval --embeddings " + q(f.embeddings) + " --model " + q(f.dir / "m.json") +
                             " --pairs " + q(f.pairs) + " --out " + q(f.dir / "report.json"));
  REQUIRE_MESSAGE(r.exit_code == 0, r.output);
  const auto report = Json::parse(fixtures::read_file(f.dir / "report.json"));
  const EmbeddingSet emb = load_embeddings(f.embeddings);
  const HeadModel model = load_model(f.dir / "m.json");
  const ScoredPairSet pairs = load_scored_pairs(f.pairs);
  CHECK(report["sts"]["pearson"].get<double>() == doctest::Approx(sts_score(&model, pairs, emb)).epsilon(1e-8));
  CHECK(report["sts"]["pairs"] == pairs.records.size());
  CHECK(fs::exists(f.dir / "report.json.manifest.json"));

  r = fixtures::run_cli("eval --embeddings " + q(f.embeddings) + " --pairs " + q(f.pairs));
  REQUIRE(r.exit_code == 0);
  const auto identity = Json::parse(r.output.substr(r.output.find('{')));
  CHECK(identity["sts"]["pearson"].get<double>() ==
        doctest::Approx(sts_score(nullptr, pairs, emb)).epsilon(1e-8));

  fixtures::write_file(f.dir / "ctx.csv", "anchor,positive,negative\n1,5,2\n9,13,10\n");
  r = fixtures::run_cli("eval --embeddings " + q(f.embeddings) + " --in-context " + q(f.dir / "ctx.csv"));
  REQUIRE_MESSAGE(r.exit_code == 0, r.output);
  const auto ctx = Json::parse(r.output.substr(r.output.find('{')));
  CHECK(ctx["in_context_sts"]["pairs"] == 4);
  fixtures::write_file(f.dir / "nopos.csv", "anchor,positive,negative\n3,,4\n");
  CHECK(fixtures::run_cli("eval --embeddings " + q(f.embeddings) + " --in-context " + q(f.dir / "nopos.csv"))
            .exit_code == 2);

  CHECK(fixtures::run_cli("eval --embeddings " + q(f.embeddings)).exit_code == 2);
  fixtures::write_file(f.dir / "bad.csv", "anchor,positive,negative\nx,1,2\n");
  CHECK(fixtures::run_cli("eval --embeddings " + q(f.embeddings) + " --in-context " + q(f.dir / "bad.csv"))
            .exit_code == 2);
}

TEST_CASE("attribute reports integrated gradients") {
  const auto f = write_task("cli_attribute");
  REQUIRE(fixtures::run_cli("train --embeddings " + q(f.embeddings) + " --triplets " + q(f.triplets) + kTrainFlags +
                            " --out " + q(f.dir / "m.json"))
              .exit_code == 0);
  fixtures::write_file(f.dir / "groups.json", R"({"signal": [0, 1, 2, 3], "rest": [4, 5, 6, 7, 8, 9, 10, 11]})");
  const auto r = fixtures::run_cli("attribute --embeddings " + q(f.embeddings) + " --model " + q(f.dir / "m.json") +
                                   " --id 3 --ref 7 --steps 64 --groups " + q(f.dir / "groups.json") + " --out " +
                                   q(f.dir / "ig.json"));
  REQUIRE_MESSAGE(r.exit_code == 0, r.output);
  const auto report = Json::parse(fixtures::read_file(f.dir / "ig.json"));
  CHECK(report["id"] == 3);
  CHECK(report["ref"] == 7);
  CHECK(report["steps"] == 64);
  CHECK(report["attributions"].size() == 12);
  CHECK(report["groups"].size() == 2);

  const EmbeddingSet emb = load_embeddings(f.embeddings);
  const HeadModel model = load_model(f.dir / "m.json");
  AttributionConfig cfg;
  cfg.steps = 64;
  cfg.reference = head_forward(model, emb.row_as_double(7)).output;
  const auto direct = integrated_gradients(model, emb.row_as_double(3), cfg);
  for (std::size_t i = 0; i < 12; ++i)
    CHECK(report["attributions"][i].get<double>() == doctest::Approx(direct.attributions[i]).epsilon(1e-8));
  CHECK(report["residual"].get<double>() == doctest::Approx(direct.residual).epsilon(1e-8));

  CHECK(fixtures::run_cli("attribute --embeddings " + q(f.embeddings) + " --model " + q(f.dir / "m.json") +
                          " --id 99999 --ref 7")
            .exit_code == 2);
  CHECK(fixtures::run_cli("attribute --embeddings " + q(f.embeddings) + " --model " + q(f.dir / "m.json") +
                          " --id 3 --ref 7 --steps 0")
            .exit_code == 2);
}

TEST_CASE("replay reproduces recorded artifacts") {
  const auto f = write_task("cli_replay");
  REQUIRE(fixtures::run_cli("train --embeddings " + q(f.embeddings) + " --triplets " + q(f.triplets) + kTrainFlags +
                            " --out " + q(f.dir / "m.json") + " --history " + q(f.dir / "h.csv"))
              .exit_code == 0);
  const fs::path manifest = f.dir / "m.json.manifest.json";
  const auto j = Json::parse(fixtures::read_file(manifest));
  CHECK(j["outputs"].size() == 2);
  CHECK(j["inputs"].size() == 2);
  auto r = fixtures::run_cli("replay " + q(manifest));
  CHECK_MESSAGE(r.exit_code == 0, r.output);

  Json tampered = j;
  tampered["outputs"][(f.dir / "m.json").string()] = "0000000000000000";
  fixtures::write_file(f.dir / "tampered.json", tampered.dump());
  r = fixtures::run_cli("replay " + q(f.dir / "tampered.json"));
  CHECK(r.exit_code == 1);
  CHECK(r.output.find("mismatch") != std::string::npos);
  CHECK(fixtures::run_cli("replay " + q(f.dir / "nope.json")).exit_code == 2);
}

TEST_CASE("TOML config supplies subcommand options") {
  const auto dir = fixtures::temp_dir("cli_config");
  const auto clusters = fixtures::gaussian_clusters(60, 6, 8.0, 5);
  write_embeddings(clusters.embeddings, dir / "e.cemb");
  fixtures::write_file(dir / "run.toml", "[project]\nepochs = 40\nseed = 21\n");
  const std::string base = "project --embeddings " + q(dir / "e.cemb");
  REQUIRE(fixtures::run_cli("--config " + q(dir / "run.toml") + " " + base + " --out " + q(dir / "a.json"))
              .exit_code == 0);
  REQUIRE(fixtures::run_cli(base + " --epochs 40 --seed 21 --out " + q(dir / "b.json")).exit_code == 0);
  CHECK(fixtures::read_file(dir / "a.json") == fixtures::read_file(dir / "b.json"));
  REQUIRE(fixtures::run_cli("--config " + q(dir / "run.toml") + " " + base + " --seed 22 --out " + q(dir / "c.json"))
              .exit_code == 0);
  CHECK(fixtures::read_file(dir / "a.json") != fixtures::read_file(dir / "c.json"));
}

TEST_CASE("serve answers HTTP and stops on SIGTERM") {
  const auto f = write_task("cli_serve");
  REQUIRE(fixtures::run_cli("project --embeddings " + q(f.embeddings) + " --view semantic_text --epochs 30 --out " +
                            q(f.dir / "proj.json"))
              .exit_code == 0);
  Json centroids = Json::object();
  for (const auto& s : fixtures::kStates) centroids[s] = {{"lat", -5.0}, {"lon", -55.0}};
  fixtures::write_file(f.dir / "centroids.json", centroids.dump());
  fixtures::write_file(f.dir / "service.json", R"({
    "catalog": "catalog.jsonl",
    "embeddings": {"text": "text.cemb"},
    "projections": {"semantic_text": "proj.json"},
    "state_centroids": "centroids.json",
    "listen": {"host": "127.0.0.1", "port": 0}})");

  const fs::path log = f.dir / "serve.log", pid_file = f.dir / "serve.pid";
  const std::string cmd = std::string(ACERVO_CLI) + " serve --service " + q(f.dir / "service.json") + " > " +
                          q(log) + " 2>&1 & echo $! > " + q(pid_file);
  REQUIRE(std::system(cmd.c_str()) == 0);

  int port = 0;
  for (int i = 0; i < 200 && port == 0; ++i) {
    std::this_thread::sleep_for(std::chrono::milliseconds(50));
    const std::string text = fixtures::read_file(log);
    const auto at = text.find("listening on 127.0.0.1:");
    if (at != std::string::npos) port = std::atoi(text.c_str() + at + 23);
  }
  const pid_t pid = std::stoi(fixtures::read_file(pid_file));
  REQUIRE_MESSAGE(port > 0, fixtures::read_file(log));

  httplib::Client client("127.0.0.1", port);
  auto res = client.Get("/api/health");
  REQUIRE(res);
  CHECK(res->status == 200);
  const auto health = Json::parse(res->body);
  CHECK(health["items"] == 160);
  CHECK(health["views"] == Json::array({"semantic_text"}));
  res = client.Get("/api/timeline/years");
  REQUIRE(res);
  CHECK(res->status == 200);
  res = client.Get("/api/points?view=semantic_image&bbox=0,0,1,1");
  REQUIRE(res);
  CHECK(res->status == 404);

  ::kill(pid, SIGTERM);
  bool stopped = false;
  for (int i = 0; i < 100 && !stopped; ++i) {
    std::this_thread::sleep_for(std::chrono::milliseconds(50));
    stopped = !httplib::Client("127.0.0.1", port).Get("/api/health");
  }
  CHECK(stopped);
  CHECK(fixtures::read_file(log).find("shutting down") != std::string::npos);
}
