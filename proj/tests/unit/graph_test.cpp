// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The kgvip Authors

#include <gtest/gtest.h>

#include <filesystem>

#include "kgvip/embedding.hpp"
#include "kgvip/error.hpp"
#include "kgvip/graph.hpp"
#include "kgvip/util.hpp"
#include "oracles.hpp"
#include "scripted.hpp"
#include "world.hpp"

namespace kgvip {
namespace {

namespace fs = std::filesystem;
using testing::Rng;

Entity entity(std::string id) { return Entity{id, "label " + id, "", "thing", {}, {}}; }

Graph path_graph(std::initializer_list<const char*> ids) {
  Graph g;
  for (const char* id : ids) g.add_entity(entity(id));
  const std::vector<const char*> v(ids);
  for (std::size_t i = 0; i + 1 < v.size(); ++i) g.add_relation({v[i], v[i + 1], "next", 1.0, {}});
  return g;
}

std::set<std::string> ids_of(const Graph& g) {
  std::set<std::string> out;
  for (const auto& [id, _] : g.entities()) out.insert(id);
  return out;
}

std::set<std::string> nodes_of(const SubgraphRef& s) { return {s.nodes.begin(), s.nodes.end()}; }

TEST(Graph, RejectsEmptyAndDuplicateIds) {
  Graph g;
  EXPECT_THROW(g.add_entity({"", "x", "", "", {}, {}}), DataError);
  EXPECT_THROW(g.add_entity({"a", "", "", "", {}, {}}), DataError);
  g.add_entity(entity("a"));
  EXPECT_THROW(g.add_entity(entity("a")), DataError);
}

TEST(Graph, NormalizesRelationsOnInsert) {
  Graph g;
  g.add_entity(entity("a"));
  g.add_entity(entity("b"));
  EXPECT_FALSE(g.add_relation({"a", "a", "self", 1.0, {}}));
  EXPECT_TRUE(g.add_relation({"a", "b", "knows", 0.4, {}}));
  EXPECT_FALSE(g.add_relation({"a", "b", "knows", 0.7, {}}));
  EXPECT_FALSE(g.add_relation({"a", "b", "knows", 0.5, {}}));
  ASSERT_EQ(g.relation_count(), 1u);
  EXPECT_DOUBLE_EQ(g.relations()[0].confidence, 0.7);
  EXPECT_TRUE(g.add_relation({"b", "a", "knows", 0.1, {}}));
  EXPECT_THROW(g.add_relation({"a", "zz", "knows", 0.5, {}}), DataError);
  EXPECT_THROW(g.add_relation({"a", "b", "likes", 1.5, {}}), DataError);
  EXPECT_NO_THROW(g.validate());
}

TEST(LoadGraph, EmptyFilesGiveEmptyGraph) {
  const auto dir = testing::scratch_dir("empty_graph");
  write_file(dir / "nodes.jsonl", "");
  write_file(dir / "edges.jsonl", "");
  const Graph g = load_graph(dir);
  EXPECT_EQ(g.entity_count(), 0u);
  EXPECT_EQ(g.relation_count(), 0u);
}

TEST(LoadGraph, DanglingEndpointIsNamed) {
  const auto dir = testing::scratch_dir("dangling");
  write_file(dir / "nodes.jsonl", R"({"id":"a","label":"A"})" "\n");
  write_file(dir / "edges.jsonl", R"({"source":"a","target":"x9","predicate":"p","confidence":1})" "\n");
  try {
    load_graph(dir);
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("x9"), std::string::npos) << e.what();
  }
}

TEST(LoadGraph, BenchmarkManifestsMatchPublishedCounts) {
  const fs::path root = KGVIP_FIXTURE_DIR;
  EXPECT_EQ(graph_stats(load_graph(root / "fvqa2plus")).nodes, 1152u);
  const auto fvqa = graph_stats(load_graph(root / "fvqa2plus"));
  EXPECT_EQ(fvqa.edges, 1767u);
  EXPECT_EQ(fvqa.image_refs, 3342u);
  const auto mvqa = graph_stats(load_graph(root / "mvqa"));
  EXPECT_EQ(mvqa.nodes, 1271u);
  EXPECT_EQ(mvqa.edges, 1468u);
  EXPECT_EQ(mvqa.image_refs, 4611u);
}

TEST(LoadGraph, ManifestMismatchIsRejected) {
  const auto dir = testing::scratch_dir("mismatch");
  fs::copy(fs::path(KGVIP_FIXTURE_DIR) / "mvqa", dir, fs::copy_options::recursive);
  write_file(dir / "manifest.json", R"({"nodes": 1271, "edges": 1469, "image_refs": 4611})");
  EXPECT_THROW(load_graph(dir), DataError);
  EXPECT_NO_THROW(load_graph(dir, LoadOptions{.verify_manifest = false}));
}

TEST(SaveGraph, RoundTripAndLineCounts) {
  Graph g = path_graph({"a", "b"});
  g.add_entity({"c", "C", "a description", "place", {"img/c1.png", "img/c2.png"}, {{"source", "x"}}});
  g.add_relation({"c", "a", "near", 0.25, std::string("seen together")});
  const auto dir = testing::scratch_dir("roundtrip");
  save_graph(g, dir);
  EXPECT_EQ(load_graph(dir), g);

  const auto small = testing::scratch_dir("small");
  save_graph(path_graph({"x", "y"}), small);
  EXPECT_EQ(split_lines(read_file(small / "nodes.jsonl")).size(), 2u);
  EXPECT_EQ(split_lines(read_file(small / "edges.jsonl")).size(), 1u);
}

TEST(SaveGraph, RandomGraphsRoundTrip) {
  Rng rng(7);
  for (int i = 0; i < 20; ++i) {
    const Graph g = testing::random_graph(rng, 20, 40);
    const auto dir = testing::scratch_dir("rt_random");
    save_graph(g, dir);
    EXPECT_EQ(load_graph(dir), g);
  }
}

TEST(SaveGraph, UnwritablePathIsIoError) {
  const auto dir = testing::scratch_dir("unwritable");
  write_file(dir / "file", "x");
  EXPECT_THROW(save_graph(path_graph({"a"}), dir / "file" / "sub"), IoError);
}

TEST(ExtractGraph, EmptyDocumentMakesNoCall) {
  auto transport = std::make_shared<testing::ScriptedTransport>(
      [](Role, const json&) -> json { throw std::logic_error("unexpected call"); });
  Gateway gw(testing::scripted_gateway_config(), transport);
  EXPECT_TRUE(extract_graph_from_text("   ", gw).empty());
  EXPECT_EQ(transport->calls(), 0u);
}

TEST(ExtractGraph, ReplaysRecordedSynopsisFragment) {
  auto rig = testing::world::replay_rig({"synopsis"});
  const Graph g = extract_graph_from_text(
      "Saito hires Cobb. Cobb is married to Mal. Arthur works with Cobb. Mal is trapped in Limbo. "
      "Maybe Arthur distrusts Saito.",
      *rig.gateway);
  EXPECT_EQ(ids_of(g), (std::set<std::string>{"arthur", "cobb", "limbo", "mal", "saito"}));
  EXPECT_EQ(g.relation_count(), 5u);
  EXPECT_EQ(rig.offline->attempts(), 0u);
}

TEST(ExtractGraph, MalformedOutputExhaustsRetries) {
  auto transport = std::make_shared<testing::ScriptedTransport>(
      [](Role, const json&) { return testing::chat_reply("not json"); });
  auto config = testing::scripted_gateway_config();
  config.retry_budget = 2;
  Gateway gw(config, transport);
  EXPECT_THROW(extract_graph_from_text("Saito hires Cobb.", gw), ModelOutputError);
  EXPECT_EQ(transport->calls(), 3u);
}

TEST(MergeDuplicates, ThresholdAboveOneIsIdentity) {
  Rng rng(3);
  Graph g = testing::random_graph(rng, 10, 15, 5);
  VectorIndex idx(4, Modality::text);
  for (const auto& [id, _] : g.entities()) idx.insert(id, EmbeddingVector({1, 0, 0, 0}));
  EXPECT_EQ(merge_duplicate_entities(g, idx, 1.0 + 1e-9), g);
}

TEST(MergeDuplicates, IdenticalVectorsMergeAndUnionImages) {
  Graph g;
  g.add_entity({"b", "Bee", "", "", {"b.png"}, {}});
  g.add_entity({"a", "A", "", "", {"a.png"}, {}});
  g.add_entity({"c", "C", "", "", {}, {}});
  g.add_relation({"b", "c", "near", 0.5, {}});
  VectorIndex idx(2, Modality::text);
  idx.insert("a", EmbeddingVector({1, 1}));
  idx.insert("b", EmbeddingVector({2, 2}));
  idx.insert("c", EmbeddingVector({1, -1}));
  const Graph m = merge_duplicate_entities(g, idx, 0.99);
  EXPECT_EQ(ids_of(m), (std::set<std::string>{"a", "c"}));
  const auto& refs = m.find("a")->image_refs;
  EXPECT_EQ(std::set<std::string>(refs.begin(), refs.end()), (std::set<std::string>{"a.png", "b.png"}));
  ASSERT_EQ(m.relation_count(), 1u);
  EXPECT_EQ(m.relations()[0].source, "a");
  EXPECT_NO_THROW(m.validate());
}

TEST(MergeDuplicates, MatchesPairwiseUnionFindOracle) {
  Rng rng(11);
  for (int trial = 0; trial < 25; ++trial) {
    Graph g = testing::random_graph(rng, 20, 30, 20);
    VectorIndex idx(3, Modality::text);
    // A few prototype directions so that some pairs clear the threshold.
    std::vector<EmbeddingVector> protos;
    for (int p = 0; p < 6; ++p) protos.push_back(testing::random_vector(rng, 3));
    std::uniform_int_distribution<int> pick(0, 5);
    std::normal_distribution<double> noise(0, 0.05);
    for (const auto& [id, _] : g.entities()) {
      const auto& p = protos[static_cast<std::size_t>(pick(rng))];
      idx.insert(id, EmbeddingVector({p.values()[0] + noise(rng), p.values()[1] + noise(rng),
                                      p.values()[2] + noise(rng)}));
    }
    const double threshold = 0.995;
    // Oracle: brute-force pairs, union-find, smallest id represents.
    std::vector<std::string> ids;
    for (const auto& [id, _] : g.entities()) ids.push_back(id);
    std::map<std::string, std::string> parent;
    for (const auto& id : ids) parent[id] = id;
    std::function<std::string(const std::string&)> find = [&](const std::string& x) {
      return parent[x] == x ? x : parent[x] = find(parent[x]);
    };
    for (std::size_t i = 0; i < ids.size(); ++i) {
      for (std::size_t j = i + 1; j < ids.size(); ++j) {
        const auto& a = *idx.find(ids[i]);
        const auto& b = *idx.find(ids[j]);
        double dot = 0;
        for (std::size_t d = 0; d < 3; ++d) dot += a.values()[d] * b.values()[d];
        if (dot >= threshold) {
          const auto ra = find(ids[i]), rb = find(ids[j]);
          if (ra != rb) parent[std::max(ra, rb)] = std::min(ra, rb);
        }
      }
    }
    std::set<std::string> expected;
    for (const auto& id : ids) expected.insert(find(id));
    const Graph m = merge_duplicate_entities(g, idx, threshold);
    EXPECT_EQ(ids_of(m), expected);
    EXPECT_NO_THROW(m.validate());
  }
}

TEST(PruneLowConfidence, Examples) {
  Graph g = path_graph({"a", "b", "c"});
  g.add_relation({"a", "c", "far", 0.2, {}});
  EXPECT_EQ(prune_low_confidence(g, 0.0).relations(), g.relations());

  Graph h;
  for (const char* id : {"a", "b", "c"}) h.add_entity(entity(id));
  h.add_relation({"a", "b", "p", 0.2, {}});
  h.add_relation({"b", "c", "p", 0.8, {}});
  const auto kept = prune_low_confidence(h, 0.5);
  ASSERT_EQ(kept.relation_count(), 1u);
  EXPECT_DOUBLE_EQ(kept.relations()[0].confidence, 0.8);

  Graph nines;
  for (const char* id : {"a", "b", "c"}) nines.add_entity(entity(id));
  nines.add_relation({"a", "b", "p", 0.9, {}});
  nines.add_relation({"b", "c", "p", 0.9, {}});
  EXPECT_EQ(prune_low_confidence(nines, 1.0).relation_count(), 0u);
}

TEST(PruneLowConfidence, HigherThresholdGivesSubset) {
  Rng rng(5);
  for (int i = 0; i < 30; ++i) {
    const Graph g = testing::random_graph(rng, 15, 40);
    const auto low = prune_low_confidence(g, 0.3).relations();
    const auto high = prune_low_confidence(g, 0.6).relations();
    for (const auto& r : high) EXPECT_NE(std::find(low.begin(), low.end(), r), low.end());
  }
}

TEST(GiantComponent, Examples) {
  const Graph connected = path_graph({"a", "b", "c"});
  EXPECT_EQ(giant_component(connected), connected);

  Graph two = path_graph({"a", "b", "c"});
  two.add_entity(entity("x"));
  two.add_entity(entity("y"));
  two.add_relation({"x", "y", "next", 1.0, {}});
  EXPECT_EQ(ids_of(giant_component(two)), (std::set<std::string>{"a", "b", "c"}));
}

TEST(GiantComponent, MatchesUnionFindOracleAndIsMaximal) {
  Rng rng(17);
  for (int i = 0; i < 50; ++i) {
    const Graph g = testing::random_graph(rng, 40, 35);
    const Graph giant = giant_component(g);
    EXPECT_EQ(ids_of(giant), testing::union_find_giant(g));
    EXPECT_EQ(graph_stats(giant).components, giant.empty() ? 0u : 1u);
    for (const auto& r : g.relations()) {
      const bool in = giant.contains(r.source);
      EXPECT_EQ(in, giant.contains(r.target));
      if (in) {
        const auto& rel = giant.relations();
        EXPECT_NE(std::find(rel.begin(), rel.end(), r), rel.end());
      }
    }
  }
}

TEST(KHop, Examples) {
  auto g = std::make_shared<const Graph>(path_graph({"a", "b", "c"}));
  const auto zero = k_hop_subgraph(g, {"a", "c"}, 0);
  EXPECT_EQ(nodes_of(zero), (std::set<std::string>{"a", "c"}));
  EXPECT_TRUE(zero.relations.empty());

  const auto one = k_hop_subgraph(g, {"a"}, 1);
  EXPECT_EQ(nodes_of(one), (std::set<std::string>{"a", "b"}));
  ASSERT_EQ(one.relations.size(), 1u);
  EXPECT_EQ(g->relations()[one.relations[0]].target, "b");
}

TEST(KHop, MatchesBfsOracleAndIsMonotone) {
  Rng rng(23);
  for (int i = 0; i < 20; ++i) {
    auto g = std::make_shared<const Graph>(testing::random_graph(rng, 200, 260, 200));
    std::set<std::string, std::less<>> seeds{"v00", "v42", "v99"};
    std::set<std::string> plain(seeds.begin(), seeds.end());
    std::set<std::string> previous;
    for (std::size_t k = 0; k <= 4; ++k) {
      const auto sub = k_hop_subgraph(g, seeds, k);
      const auto oracle = testing::bfs_k_hop(*g, plain, k);
      EXPECT_EQ(nodes_of(sub), oracle.nodes);
      EXPECT_EQ(std::set<std::size_t>(sub.relations.begin(), sub.relations.end()), oracle.relations);
      EXPECT_TRUE(std::includes(oracle.nodes.begin(), oracle.nodes.end(), previous.begin(), previous.end()));
      previous = oracle.nodes;
    }
  }
}

TEST(InducedSubgraph, Examples) {
  auto g = std::make_shared<const Graph>(path_graph({"a", "b", "c", "d"}));
  EXPECT_EQ(induced_subgraph(g, {"a", "b", "c", "d"}).relations.size(), 3u);
  EXPECT_TRUE(induced_subgraph(g, {"b"}).relations.empty());
}

TEST(InducedSubgraph, MatchesLinearFilterOracle) {
  Rng rng(29);
  std::bernoulli_distribution coin(0.4);
  for (int i = 0; i < 30; ++i) {
    auto g = std::make_shared<const Graph>(testing::random_graph(rng, 30, 80));
    std::set<std::string, std::less<>> nodes;
    for (const auto& [id, _] : g->entities()) {
      if (coin(rng)) nodes.insert(id);
    }
    std::vector<std::size_t> expected;
    for (std::size_t r = 0; r < g->relations().size(); ++r) {
      if (nodes.contains(g->relations()[r].source) && nodes.contains(g->relations()[r].target)) {
        expected.push_back(r);
      }
    }
    EXPECT_EQ(induced_subgraph(g, nodes).relations, expected);
  }
}

TEST(SubgraphUnion, AlgebraicLaws) {
  Rng rng(31);
  std::bernoulli_distribution coin(0.3);
  for (int i = 0; i < 30; ++i) {
    auto g = std::make_shared<const Graph>(testing::random_graph(rng, 25, 50));
    auto pick = [&] {
      std::set<std::string, std::less<>> s;
      for (const auto& [id, _] : g->entities()) {
        if (coin(rng)) s.insert(id);
      }
      return induced_subgraph(g, s);
    };
    const auto a = pick(), b = pick(), c = pick();
    const auto ab = subgraph_union(a, b);
    EXPECT_EQ(nodes_of(subgraph_union(a, a)), nodes_of(a));
    EXPECT_EQ(subgraph_union(a, a).relations, a.relations);
    EXPECT_EQ(nodes_of(ab), nodes_of(subgraph_union(b, a)));
    EXPECT_EQ(nodes_of(subgraph_union(ab, c)), nodes_of(subgraph_union(a, subgraph_union(b, c))));
    // Set oracle: node union with induced relations.
    std::set<std::string, std::less<>> all(a.nodes.begin(), a.nodes.end());
    all.insert(b.nodes.begin(), b.nodes.end());
    EXPECT_EQ(ab.relations, induced_subgraph(g, all).relations);
  }
}

TEST(SubgraphUnion, DisjointWithoutBridgesAddsCounts) {
  Graph raw = path_graph({"a", "b"});
  raw.add_entity(entity("c"));
  raw.add_entity(entity("d"));
  raw.add_relation({"c", "d", "next", 1.0, {}});
  auto g = std::make_shared<const Graph>(raw);
  const auto u = subgraph_union(induced_subgraph(g, {"a", "b"}), induced_subgraph(g, {"c", "d"}));
  EXPECT_EQ(u.nodes.size(), 4u);
  EXPECT_EQ(u.relations.size(), 2u);
}

TEST(GraphStats, EmptyAndSmall) {
  EXPECT_EQ(graph_stats(Graph{}), GraphStats{});
  Graph g = path_graph({"a", "b"});
  g.add_entity({"c", "C", "", "", {"1.png", "2.png"}, {}});
  EXPECT_EQ(graph_stats(g), (GraphStats{3, 1, 2, 2}));
}

TEST(AttachImages, AppendsDedupedAndReportsUnknown) {
  Graph g;
  g.add_entity({"a", "A", "", "", {"a1.png"}, {}});
  const auto r = attach_images(g, {{"a", {"a1.png", "a2.png", "a2.png"}}, {"zz", {"z.png"}}});
  EXPECT_EQ(r.graph.find("a")->image_refs, (std::vector<std::string>{"a1.png", "a2.png"}));
  EXPECT_EQ(r.unknown_entities, (std::vector<std::string>{"zz"}));
}

TEST(MergeGraphs, KeepsFirstRecordAndMergesImages) {
  Graph a, b;
  a.add_entity({"x", "First", "", "", {"1.png"}, {}});
  b.add_entity({"x", "Second", "", "", {"2.png"}, {}});
  b.add_entity(entity("y"));
  b.add_relation({"x", "y", "p", 0.5, {}});
  const Graph m = merge_graphs(a, b);
  EXPECT_EQ(m.find("x")->label, "First");
  EXPECT_EQ(m.find("x")->image_refs, (std::vector<std::string>{"1.png", "2.png"}));
  EXPECT_EQ(m.relation_count(), 1u);
}

}  // namespace
}  // namespace kgvip
