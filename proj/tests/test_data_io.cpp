#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "aggnet/dataset.hpp"
#include "aggnet/errors.hpp"
#include "aggnet/pipeline.hpp"
#include "aggnet/serialize.hpp"
#include "aggnet/vocab.hpp"

#include "doctest.h"
#include "testutil.hpp"

using namespace aggnet;
namespace fs = std::filesystem;

namespace {

const char* kStopwords = "resources/stopwords_en.txt";
const char* kEmoji = "resources/emoji_ranges.txt";

// Every test artifact lives under build/ so the source tree stays clean.
std::string temp_path(const std::string& name) {
  fs::create_directories("build/test_tmp");
  return "build/test_tmp/" + name;
}

std::string write_temp(const std::string& name, const std::string& content) {
  std::string path = temp_path(name);
  std::ofstream out(path, std::ios::binary);
  out << content;
  return path;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  return std::string(std::istreambuf_iterator<char>(in), {});
}

void corrupt_byte(const std::string& path, std::size_t offset) {
  std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
  REQUIRE(f.good());
  f.seekg(static_cast<std::streamoff>(offset));
  char c = 0;
  f.read(&c, 1);
  c = static_cast<char>(c ^ 0x5a);
  f.seekp(static_cast<std::streamoff>(offset));
  f.write(&c, 1);
}

ParamStore sample_store(std::uint64_t seed) {
  Rng rng(seed);
  ParamStore store;
  store.add("alpha", Tensor::uniform({3, 4}, -1.0, 1.0, rng), true);
  store.add("beta", Tensor::uniform({5}, -2.0, 2.0, rng), false);
  store.add("gamma.w", Tensor::uniform({2, 2, 3}, -0.1, 0.1, rng), true);
  return store;
}

}  // namespace

TEST_CASE("dataset loads plain rows and skips only the canonical header") {
  std::string path = write_temp("plain.csv",
                                "id,text,label\n"
                                "a1,hello there,CAG\n"
                                "a2,general kenobi,NAG\n"
                                "a3,you are lost,OAG\n");
  Dataset ds = load_dataset(path);
  REQUIRE(ds.size() == 3);
  CHECK(ds.examples[0].id == "a1");
  CHECK(ds.examples[0].text == "hello there");
  CHECK(ds.examples[0].label == 0);
  CHECK(ds.examples[1].label == 1);
  CHECK(ds.examples[2].label == 2);

  auto counts = ds.class_counts();
  CHECK(counts[0] == 1);
  CHECK(counts[1] == 1);
  CHECK(counts[2] == 1);

  // A first row that merely resembles a header is data.
  std::string no_header = write_temp("noheader.csv", "id,text,OAG\nb2,more text,CAG\n");
  Dataset ds2 = load_dataset(no_header);
  REQUIRE(ds2.size() == 2);
  CHECK(ds2.examples[0].id == "id");
  CHECK(ds2.examples[0].label == 2);
}

TEST_CASE("dataset handles quoting: commas, doubled quotes, embedded newlines, CRLF") {
  std::string path = write_temp("quoted.csv",
                                "id,text,label\r\n"
                                "q1,\"wait, what\",CAG\r\n"
                                "q2,\"she said \"\"no\"\"\",NAG\r\n"
                                "q3,\"line one\nline two\",OAG\r\n");
  Dataset ds = load_dataset(path);
  REQUIRE(ds.size() == 3);
  CHECK(ds.examples[0].text == "wait, what");
  CHECK(ds.examples[1].text == "she said \"no\"");
  CHECK(ds.examples[2].text == "line one\nline two");
}

TEST_CASE("dataset errors carry the offending row number") {
  std::string two_cols = write_temp("twocols.csv", "id,text,label\nok,CAG\n");
  CHECK_THROWS_WITH_AS((void)load_dataset(two_cols),
                       doctest::Contains("row 2"), ParseError);

  std::string bad_label = write_temp("badlabel.csv",
                                     "id,text,label\nx,fine,CAG\ny,oops,AGG\n");
  CHECK_THROWS_WITH_AS((void)load_dataset(bad_label),
                       doctest::Contains("row 3"), DataError);

  std::string unterminated = write_temp("unterm.csv", "z,\"no closing quote,CAG\n");
  CHECK_THROWS_AS((void)load_dataset(unterminated), ParseError);

  CHECK_THROWS_AS((void)load_dataset("build/test_tmp/definitely_missing.csv"), IoError);
}

TEST_CASE("duplicate ids load fine but are reported") {
  std::string path = write_temp("dups.csv",
                                "id,text,label\nd,one,CAG\nd,two,NAG\ne,three,OAG\n");
  std::vector<std::string> warnings;
  Dataset ds = load_dataset(path, &warnings);
  CHECK(ds.size() == 3);
  REQUIRE(warnings.size() == 1);
  CHECK(warnings[0].find("'d'") != std::string::npos);
  CHECK(warnings[0].find("row 3") != std::string::npos);

  // Without a sink the duplicates are silently accepted.
  CHECK(load_dataset(path).size() == 3);
}

TEST_CASE("merge keeps originals first and augmented second") {
  Dataset a, b;
  a.examples.push_back({"o1", "orig", 0});
  a.examples.push_back({"o2", "orig", 1});
  b.examples.push_back({"g1", "aug", 2});
  Dataset merged = merge_datasets(a, b);
  REQUIRE(merged.size() == 3);
  CHECK(merged.examples[0].id == "o1");
  CHECK(merged.examples[1].id == "o2");
  CHECK(merged.examples[2].id == "g1");
  auto counts = merged.class_counts();
  CHECK(counts[0] + counts[1] + counts[2] == 3);
}

TEST_CASE("fnv1a64 matches published reference values") {
  auto hash_of = [](const std::string& s) {
    return fnv1a64({reinterpret_cast<const unsigned char*>(s.data()), s.size()});
  };
  CHECK(hash_of("") == 0xcbf29ce484222325ULL);
  CHECK(hash_of("a") == 0xaf63dc4c8601ec8cULL);
  CHECK(hash_of("hello") == 0xa430d84680aabd0bULL);
  CHECK(hash_string(0xcbf29ce484222325ULL) == "fnv1a64:cbf29ce484222325");

  std::string file = write_temp("hashme.bin", "hello");
  CHECK(fnv1a64_file(file) == hash_of("hello"));
}

TEST_CASE("bundle round-trip is bitwise exact") {
  std::string dir = temp_path("bundle_rt");
  fs::remove_all(dir);
  ParamStore store = sample_store(17);
  nlohmann::json extra;
  extra["note"] = "round trip";
  save_bundle(dir, store, extra);

  LoadedBundle back = load_bundle(dir);
  CHECK(back.manifest["note"] == "round trip");
  CHECK(back.manifest["format_version"] == kBundleFormatVersion);
  REQUIRE(back.records.size() == 3);
  REQUIRE(back.tensors.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    const Param& orig = store.entry(i);
    CHECK(back.records[i].name == orig.name);
    CHECK(back.records[i].trainable == orig.trainable);
    CHECK(back.records[i].dtype == "f64");
    REQUIRE(back.tensors[i].same_shape(orig.value));
    for (std::size_t j = 0; j < orig.value.size(); ++j) {
      CHECK(back.tensors[i][j] == orig.value[j]);
    }
  }
}

TEST_CASE("bundle integrity failures are told apart") {
  auto fresh = [&](const std::string& name) {
    std::string dir = temp_path(name);
    fs::remove_all(dir);
    save_bundle(dir, sample_store(5), nlohmann::json::object());
    return dir;
  };

  SUBCASE("flipped blob byte -> HashMismatchError") {
    std::string dir = fresh("bundle_corrupt");
    corrupt_byte(dir + "/weights.bin", 10);
    CHECK_THROWS_AS((void)load_bundle(dir), HashMismatchError);
  }

  SUBCASE("future format_version -> VersionError") {
    std::string dir = fresh("bundle_version");
    auto manifest = nlohmann::json::parse(slurp(dir + "/manifest.json"));
    manifest["format_version"] = kBundleFormatVersion + 1;
    write_file_atomic(dir + "/manifest.json", manifest.dump(2));
    CHECK_THROWS_AS((void)load_bundle(dir), VersionError);
  }

  SUBCASE("blob shorter than its records -> TruncatedBlobError") {
    std::string dir = fresh("bundle_trunc");
    fs::resize_file(dir + "/weights.bin", 16);
    CHECK_THROWS_AS((void)load_bundle(dir), TruncatedBlobError);
  }
}

TEST_CASE("write_file_atomic creates and overwrites") {
  std::string path = temp_path("atomic.txt");
  write_file_atomic(path, "first");
  CHECK(slurp(path) == "first");
  write_file_atomic(path, "second, longer content\n");
  CHECK(slurp(path) == "second, longer content\n");
  CHECK(!fs::exists(path + ".tmp"));
}

TEST_CASE("stratified split is per-class, disjoint and seeded") {
  Dataset ds;
  for (int i = 0; i < 30; ++i) {
    ds.examples.push_back({"s" + std::to_string(i), "text", i % 3});
  }

  Dataset train, dev;
  stratified_split(ds, 0.2, 9, &train, &dev);
  CHECK(train.size() == 24);
  CHECK(dev.size() == 6);
  auto dev_counts = dev.class_counts();
  CHECK(dev_counts[0] == 2);
  CHECK(dev_counts[1] == 2);
  CHECK(dev_counts[2] == 2);

  std::set<std::string> ids;
  for (const auto& ex : train.examples) ids.insert(ex.id);
  for (const auto& ex : dev.examples) {
    CHECK(ids.count(ex.id) == 0);
    ids.insert(ex.id);
  }
  CHECK(ids.size() == 30);

  Dataset train2, dev2;
  stratified_split(ds, 0.2, 9, &train2, &dev2);
  REQUIRE(dev2.size() == dev.size());
  for (std::size_t i = 0; i < dev.size(); ++i) {
    CHECK(dev2.examples[i].id == dev.examples[i].id);
  }

  Dataset train3, dev3;
  stratified_split(ds, 0.2, 10, &train3, &dev3);
  bool same = dev3.size() == dev.size();
  if (same) {
    for (std::size_t i = 0; i < dev.size(); ++i) {
      same = same && dev3.examples[i].id == dev.examples[i].id;
    }
  }
  CHECK(!same);

  Dataset train4, dev4;
  stratified_split(ds, 0.0, 9, &train4, &dev4);
  CHECK(dev4.size() == 0);
  CHECK(train4.size() == 30);

  CHECK_THROWS_AS(stratified_split(ds, 1.0, 9, &train4, &dev4), ConfigError);
  CHECK_THROWS_AS(stratified_split(ds, -0.1, 9, &train4, &dev4), ConfigError);
}

TEST_CASE("encode_example pads, truncates and emits trigrams on demand") {
  Preprocessor prep = Preprocessor::from_files(kStopwords, kEmoji);
  Vocab words = Vocab::build({{"angry", "words", "fly", "fast"}});
  Vocab trigrams = Vocab::build({to_trigram_stream({"angry", "words", "fly", "fast"})});

  LabeledExample ex{"e1", "Angry words fly FAST today", 2};
  EncodedExample enc = encode_example(ex, prep, words, &trigrams, 8, true);
  CHECK(enc.id == "e1");
  CHECK(enc.label == 2);
  REQUIRE(enc.word_ids.size() == 8);
  CHECK(enc.word_ids[0] == words.lookup("angry"));
  CHECK(enc.word_ids[1] == words.lookup("words"));
  CHECK(enc.word_ids[2] == words.lookup("fly"));
  CHECK(enc.word_ids[3] == words.lookup("fast"));
  CHECK(enc.word_ids[4] == Vocab::kOov);  // "today" is unknown
  CHECK(enc.word_ids[5] == Vocab::kPad);
  REQUIRE(enc.trigram_ids.size() == 8);
  CHECK(enc.trigram_ids[0] == trigrams.lookup("ang"));

  EncodedExample no_tri = encode_example(ex, prep, words, &trigrams, 8, false);
  CHECK(no_tri.trigram_ids.empty());

  EncodedExample short_enc = encode_example(ex, prep, words, nullptr, 2, false);
  REQUIRE(short_enc.word_ids.size() == 2);
  CHECK(short_enc.word_ids[1] == words.lookup("words"));
}

TEST_CASE("embedding bundle round-trip and artifact verification") {
  Rng rng(3);
  EmbeddingMatrix m;
  m.source = EmbeddingSource::kAggression;
  m.dim = 5;
  m.table = Tensor::uniform({6, 5}, -1.0, 1.0, rng);
  Vocab vocab = Vocab::build({{"red", "green", "blue", "cyan"}});

  std::string dir = temp_path("emb_bundle");
  fs::remove_all(dir);
  save_embedding_bundle(dir, m, vocab, kStopwords, kEmoji);
  for (const char* f : {"manifest.json", "weights.bin", "vocab.txt",
                        "stopwords.txt", "emoji_ranges.txt"}) {
    INFO("missing file: " << f);
    CHECK(fs::exists(dir + "/" + std::string(f)));
  }

  EmbeddingBundle back = load_embedding_bundle(dir);
  CHECK(back.source == EmbeddingSource::kAggression);
  CHECK(back.matrix.dim == 5);
  REQUIRE(back.matrix.table.same_shape(m.table));
  for (std::size_t i = 0; i < m.table.size(); ++i) {
    CHECK(back.matrix.table[i] == m.table[i]);
  }
  CHECK(back.vocab.size() == vocab.size());
  CHECK(back.vocab.lookup("blue") == vocab.lookup("blue"));

  // The copied stopword list is part of the sealed bundle.
  std::ofstream(dir + "/stopwords.txt", std::ios::app) << "tampered\n";
  CHECK_THROWS_AS((void)load_embedding_bundle(dir), HashMismatchError);
}

namespace {

std::unique_ptr<Model> tiny_model_for_io(const Vocab& vocab) {
  EnsembleConfig cfg;
  cfg.name = "io-mini";
  cfg.max_len = 6;
  cfg.dense_hidden = {5};
  cfg.dropout = 0.0;
  cfg.seed = 21;
  SubnetworkSpec sn;
  sn.source = EmbeddingSource::kGlovePlusPlus;
  sn.kernel = 2;
  sn.filters = 3;
  sn.reducer = CapsuleReducer{2, 2, 2};
  cfg.subnetworks.push_back(sn);

  Rng rng(5);
  EmbeddingMatrix m;
  m.source = EmbeddingSource::kGlovePlusPlus;
  m.dim = 4;
  m.table = Tensor::uniform({vocab.size(), 4}, -0.5, 0.5, rng);
  std::map<EmbeddingSource, EmbeddingMatrix> embs;
  embs.emplace(EmbeddingSource::kGlovePlusPlus, std::move(m));
  return std::make_unique<Model>(cfg, std::move(embs));
}

}  // namespace

TEST_CASE("model bundle round-trip preserves parameters and predictions") {
  Vocab vocab = Vocab::build({{"storm", "rising", "calm", "sea", "wild"}});
  auto model = tiny_model_for_io(vocab);

  std::string dir = temp_path("model_bundle");
  fs::remove_all(dir);
  save_model_bundle(dir, *model, vocab, nullptr, kStopwords, kEmoji);

  ModelBundle back = load_model_bundle(dir);
  REQUIRE(back.model != nullptr);
  CHECK(back.model->config().name == "io-mini");
  CHECK(!back.trigram_vocab.has_value());
  REQUIRE(back.model->params().count() == model->params().count());
  for (std::size_t i = 0; i < model->params().count(); ++i) {
    const Param& a = model->params().entry(i);
    const Param& b = back.model->params().entry(i);
    CHECK(a.name == b.name);
    REQUIRE(a.value.same_shape(b.value));
    for (std::size_t j = 0; j < a.value.size(); ++j) {
      CHECK(a.value[j] == b.value[j]);
    }
  }

  // The bundle encodes raw text by itself and must agree with the original.
  LabeledExample raw{"r1", "The WILD storm is rising again", 0};
  EncodedExample enc = back.encode(raw);
  REQUIRE(enc.word_ids.size() == 6);
  CHECK(enc.word_ids[0] == vocab.lookup("wild"));
  Tensor p_orig = model->infer_probs(enc);
  Tensor p_back = back.model->infer_probs(enc);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(p_orig[i] == p_back[i]);
  }

  // Tampering with the copied vocab must not go unnoticed.
  std::ofstream(dir + "/vocab.txt", std::ios::app) << "extra\n";
  CHECK_THROWS_AS((void)load_model_bundle(dir), HashMismatchError);
}

TEST_CASE("feature export taps the requested stage") {
  Vocab vocab = Vocab::build({{"storm", "rising", "calm", "sea", "wild"}});
  auto model = tiny_model_for_io(vocab);

  std::vector<EncodedExample> exs;
  EncodedExample a;
  a.id = "f1";
  a.label = 1;
  a.word_ids = {2, 3, 4, 5, 6, 0};
  exs.push_back(a);
  EncodedExample b = a;
  b.id = "f2";
  b.label = -1;  // unlabeled
  exs.push_back(b);

  auto count_cols = [](const std::string& tsv) {
    std::size_t tabs = 0;
    for (char c : tsv) {
      if (c == '\n') break;
      tabs += c == '\t';
    }
    return tabs + 1;
  };

  std::string merged = export_features_tsv(*model, exs, FeatureTap::kMerged);
  CHECK(count_cols(merged) == 2 + model->merge_width());
  CHECK(merged.rfind("id\tlabel\tf0", 0) == 0);
  CHECK(merged.find("\nf2\t-\t") != std::string::npos);
  CHECK(merged.find("\nf1\tNAG\t") != std::string::npos);

  std::string head = export_features_tsv(*model, exs, FeatureTap::kHead);
  CHECK(count_cols(head) == 2 + 5);  // dense_hidden = {5}

  std::string sn = export_features_tsv(*model, exs, FeatureTap::kSubnetwork, 1);
  CHECK(count_cols(sn) == 2 + 4);  // 2 capsules x 2 dims

  CHECK_THROWS_AS((void)export_features_tsv(*model, exs, FeatureTap::kSubnetwork, 0),
                  ConfigError);
  CHECK_THROWS_AS((void)export_features_tsv(*model, exs, FeatureTap::kSubnetwork, 2),
                  ConfigError);
}
