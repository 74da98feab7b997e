#pragma once

// Shared generators for tests: seeded random catalogs, embeddings, temp dirs.

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <span>
#include <sys/wait.h>
#include <sstream>
#include <string>
#include <vector>

#include "acervo/catalog.hpp"
#include "acervo/datasets.hpp"
#include "acervo/embeddings.hpp"
#include "acervo/evaluation.hpp"

namespace fixtures {

using acervo::Catalog;
using acervo::ContrastiveTripletSet;
using acervo::EmbeddingSet;
using acervo::ScoredPairSet;
using acervo::Item;
using acervo::ItemId;

inline const std::vector<std::string> kCategorias = {"cerâmica", "cestaria", "plumária", "armas", "adornos"};
inline const std::vector<std::string> kPovos = {"Tikuna", "Kayapó", "Bororo", "Xavante", "Yanomami", "Guarani"};
inline const std::vector<std::string> kStates = {"AM", "PA", "MT", "RR", "MS"};
inline const std::vector<std::string> kMaterials = {"argila", "palha", "pena", "madeira", "semente", "algodão"};

inline double uniform(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

inline std::size_t pick(std::mt19937_64& rng, std::size_t n) { return static_cast<std::size_t>(rng() % n); }

// Every optional field is present with probability ~0.7.
inline Catalog random_catalog(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<Item> items;
  std::vector<ItemId> ids;
  for (std::size_t i = 0; i < n; ++i) ids.push_back(1 + i * 3 + pick(rng, 3));
  for (ItemId id : ids) {
    Item it;
    it.id = id;
    it.titulo = "item " + std::to_string(id);
    auto maybe = [&] { return uniform(rng) < 0.7; };
    if (maybe()) it.categoria = kCategorias[pick(rng, kCategorias.size())];
    if (maybe()) it.povo = kPovos[pick(rng, kPovos.size())];
    if (maybe()) it.descricao = "descrição " + std::to_string(id);
    if (maybe()) it.thumbnail_url = "https://img.example/" + std::to_string(id) + ".jpg";
    if (maybe()) {
      acervo::PartialDate d;
      d.year = 1940 + static_cast<int>(pick(rng, 12));
      if (maybe()) {
        d.month = 1 + static_cast<int>(pick(rng, 12));
        if (maybe()) d.day = 1 + static_cast<int>(pick(rng, 28));
      }
      it.acquisition = d;
    }
    if (maybe()) it.state = kStates[pick(rng, kStates.size())];
    if (uniform(rng) < 0.4) it.community_coords = acervo::GeoCoord{-10.0 + 5.0 * uniform(rng), -60.0 + 5.0 * uniform(rng)};
    const std::size_t nm = pick(rng, 3);
    for (std::size_t m = 0; m < nm; ++m) it.materials.push_back(kMaterials[pick(rng, kMaterials.size())]);
    if (uniform(rng) < 0.3) it.extensions["altura_cm"] = std::round(100.0 * uniform(rng));
    items.push_back(std::move(it));
  }
  return Catalog(std::move(items));
}

inline EmbeddingSet random_embeddings(std::span<const ItemId> ids, std::size_t dim, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  std::vector<float> values;
  for (std::size_t i = 0; i < ids.size() * dim; ++i) values.push_back(static_cast<float>(g(rng)));
  return EmbeddingSet(dim, {ids.begin(), ids.end()}, std::move(values));
}

// Three isotropic Gaussian clusters; centers on a scaled simplex so that every
// pair of centers is `separation` sigma apart. Labels 0..2 in id order.
struct Clusters {
  EmbeddingSet embeddings;
  std::vector<int> labels;
};

inline Clusters gaussian_clusters(std::size_t n, std::size_t dim, double separation, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  const double offset = separation / std::sqrt(2.0);  // |e_i - e_j| * offset = separation
  std::vector<ItemId> ids;
  std::vector<float> values;
  Clusters out;
  for (std::size_t i = 0; i < n; ++i) {
    const int label = static_cast<int>(i % 3);
    ids.push_back(i + 1);
    out.labels.push_back(label);
    for (std::size_t d = 0; d < dim; ++d)
      values.push_back(static_cast<float>(g(rng) + (d == static_cast<std::size_t>(label) ? offset : 0.0)));
  }
  out.embeddings = EmbeddingSet(dim, std::move(ids), std::move(values));
  return out;
}

// Items in four categorias; embeddings carry the class signal on a few
// coordinates and strong nuisance noise everywhere else.
struct TripletTask {
  Catalog catalog;
  EmbeddingSet embeddings;
  ContrastiveTripletSet triplets;
  ScoredPairSet sts_pairs;  // same class -> 4, different -> 1
};

inline TripletTask triplet_task(std::size_t n, std::size_t dim, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  const std::size_t classes = 4;
  std::vector<std::vector<double>> centers(classes, std::vector<double>(dim, 0.0));
  for (std::size_t c = 0; c < classes; ++c)
    for (std::size_t d = 0; d < 4; ++d) centers[c][d] = 1.5 * g(rng);

  std::vector<Item> items;
  std::vector<ItemId> ids;
  std::vector<float> values;
  for (std::size_t i = 0; i < n; ++i) {
    Item it;
    it.id = i + 1;
    it.titulo = "item " + std::to_string(i + 1);
    it.categoria = kCategorias[i % classes];
    items.push_back(it);
    ids.push_back(it.id);
    for (std::size_t d = 0; d < dim; ++d)
      values.push_back(static_cast<float>(centers[i % classes][d] + (d < 4 ? 0.3 : 1.5) * g(rng)));
  }
  TripletTask task;
  task.catalog = Catalog(items);
  task.embeddings = EmbeddingSet(dim, std::move(ids), std::move(values));

  std::vector<std::pair<ItemId, ItemId>> pairs;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t j = (i + classes * (1 + rng() % 3)) % n;
    if (j % classes == i % classes && j != i) pairs.emplace_back(i + 1, j + 1);
  }
  task.triplets = build_triplets(task.catalog, pairs, seed);
  for (std::size_t i = 0; i + 1 < n; i += 2) {
    const ItemId a = i + 1, b = i + 1 + (rng() % 2 == 0 ? classes : 1);
    if (b > n) continue;
    task.sts_pairs.records.push_back({a, b, (a - 1) % classes == (b - 1) % classes ? 4.0 : 1.0});
  }
  return task;
}

inline std::filesystem::path temp_dir(const std::string& name) {
  std::filesystem::path dir = std::filesystem::path(ACERVO_TEST_TMP) / name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

inline void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
}

struct CommandResult {
  int exit_code = -1;
  std::string output;  // stdout + stderr
};

inline CommandResult run_cli(const std::string& args) {
  const std::string log = std::string(ACERVO_TEST_TMP) + "/cli_" + std::to_string(std::rand()) + ".log";
  std::filesystem::create_directories(ACERVO_TEST_TMP);
  const std::string cmd = std::string(ACERVO_CLI) + " " + args + " > " + log + " 2>&1";
  const int status = std::system(cmd.c_str());
  CommandResult r;
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.output = read_file(log);
  std::filesystem::remove(log);
  return r;
}

}  // namespace fixtures
