#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "core/corpus.hpp"
#include "core/error.hpp"

using namespace dmrm;
namespace fs = std::filesystem;

namespace {

std::string join(const std::vector<std::string>& toks) {
    std::string out;
    for (std::size_t i = 0; i < toks.size(); ++i) {
        if (i) out += ' ';
        out += toks[i];
    }
    return out;
}

fs::path fresh_dir(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / name;
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

}  // namespace

TEST_CASE("text preprocessing") {
    SUBCASE("lowercase, digits and contractions in pipeline order") {
        CHECK(preprocess_text("Is the Dog BROWN?") ==
              std::vector<std::string>{"is", "the", "dog", "brown?"});
        CHECK(preprocess_text("there are 2 dogs") ==
              std::vector<std::string>{"there", "are", "two", "dogs"});
        CHECK(preprocess_text("20 birds") == std::vector<std::string>{"twenty", "birds"});
        CHECK(preprocess_text("make it 40") == std::vector<std::string>{"make", "it", "forty"});
        // irregular or long runs fall back to per-digit words
        CHECK(preprocess_text("route 66") == std::vector<std::string>{"route", "six", "six"});
        CHECK(preprocess_text("in 1984") ==
              std::vector<std::string>{"in", "one", "nine", "eight", "four"});
        CHECK(preprocess_text("I don't know") ==
              std::vector<std::string>{"i", "do", "not", "know"});
        CHECK(preprocess_text("they're won't can't") ==
              std::vector<std::string>{"they", "are", "will", "not", "cannot"});
        CHECK(preprocess_text("the dog's bone") ==
              std::vector<std::string>{"the", "dogs", "bone"});
        CHECK(preprocess_text("  padded\t text \n") == std::vector<std::string>{"padded", "text"});
    }

    SUBCASE("idempotent on its own output") {
        const std::vector<std::string> samples = {
            "Can't you see 3 RED squares?", "it's 10 o'clock", "I'm not sure they'd agree",
            "A 250 piece set"};
        for (const std::string& s : samples) {
            const std::vector<std::string> once = preprocess_text(s);
            CHECK(preprocess_text(join(once)) == once);
        }
    }
}

TEST_CASE("tokenize_and_truncate caps by role and keeps leading tokens") {
    std::vector<std::vector<std::string>> streams;
    std::vector<std::string> words;
    for (int i = 0; i < 30; ++i)
        words.push_back(std::string("w") + static_cast<char>('a' + i / 10) +
                        static_cast<char>('a' + i % 10));
    streams.push_back(words);
    const Vocabulary vocab = build_vocabulary(streams, 1);

    std::string text;
    for (int i = 0; i < 30; ++i) text += (i ? " " : "") + words[static_cast<std::size_t>(i)];

    const auto cap = tokenize_and_truncate(vocab, text, TextRole::kCaption);
    const auto q = tokenize_and_truncate(vocab, text, TextRole::kQuestion);
    const auto a = tokenize_and_truncate(vocab, text, TextRole::kAnswer);
    CHECK(cap.size() == 24);
    CHECK(q.size() == 16);
    CHECK(a.size() == 8);
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == vocab.id(words[i]));

    CHECK(tokenize_and_truncate(vocab, "", TextRole::kQuestion).empty());
    CHECK(tokenize_and_truncate(vocab, "unseen token", TextRole::kAnswer) ==
          std::vector<int>{Vocabulary::kUnk, Vocabulary::kUnk});
}

TEST_CASE("vocabulary construction") {
    SUBCASE("min_count keeps exactly the frequent tokens") {
        std::vector<std::vector<std::string>> streams;
        streams.push_back(std::vector<std::string>(6, "bike"));
        streams.push_back(std::vector<std::string>(5, "red"));
        streams.push_back(std::vector<std::string>(4, "the"));
        const Vocabulary v = build_vocabulary(streams, 5);
        CHECK(v.size() == Vocabulary::kNumSpecials + 2);
        CHECK(v.contains("bike"));
        CHECK(v.contains("red"));
        CHECK_FALSE(v.contains("the"));
        // ordering: descending count after the specials
        CHECK(v.id("bike") == Vocabulary::kNumSpecials);
        CHECK(v.id("red") == Vocabulary::kNumSpecials + 1);
    }

    SUBCASE("threshold met exactly") {
        const Vocabulary v = build_vocabulary({{"a"}}, 1);
        CHECK(v.size() == Vocabulary::kNumSpecials + 1);
        CHECK(v.contains("a"));
    }

    SUBCASE("ties broken lexicographically") {
        const Vocabulary v = build_vocabulary({{"pear", "apple", "apple", "pear"}}, 1);
        CHECK(v.id("apple") == Vocabulary::kNumSpecials);
        CHECK(v.id("pear") == Vocabulary::kNumSpecials + 1);
    }

    SUBCASE("specials are pinned and OOV maps to UNK") {
        const Vocabulary v = build_vocabulary({{"x"}}, 1);
        CHECK(v.token(Vocabulary::kPad) == "<pad>");
        CHECK(v.token(Vocabulary::kUnk) == "<unk>");
        CHECK(v.token(Vocabulary::kBos) == "<bos>");
        CHECK(v.token(Vocabulary::kEos) == "<eos>");
        CHECK(v.id("never-seen") == Vocabulary::kUnk);
    }

    SUBCASE("empty stream is rejected") {
        CHECK_THROWS_WITH_AS(build_vocabulary({}, 1), "empty training corpus", Error);
        CHECK_THROWS_WITH_AS(build_vocabulary({{}, {}}, 1), "empty training corpus", Error);
    }

    SUBCASE("deterministic across builds") {
        const std::vector<std::vector<std::string>> streams{{"b", "a", "c", "a"}, {"c", "b"}};
        const Vocabulary v1 = build_vocabulary(streams, 1);
        const Vocabulary v2 = build_vocabulary(streams, 1);
        CHECK(v1.id_to_token == v2.id_to_token);
        CHECK(v1.fingerprint() == v2.fingerprint());
    }
}

TEST_CASE("vocabulary file round trip and fingerprint") {
    const Vocabulary v = build_vocabulary({{"red", "blue", "red"}}, 1);
    const fs::path dir = fresh_dir("dmrm_test_vocab");
    const std::string path = (dir / "vocab.txt").string();
    v.save(path);
    const Vocabulary loaded = Vocabulary::load(path);
    CHECK(loaded.id_to_token == v.id_to_token);
    CHECK(loaded.min_count == v.min_count);
    CHECK(loaded.fingerprint() == v.fingerprint());

    const Vocabulary other = build_vocabulary({{"red", "green", "red"}}, 1);
    CHECK(other.fingerprint() != v.fingerprint());

    std::ofstream bad((dir / "bad.txt").string());
    bad << "no header\n<pad>\n";
    bad.close();
    CHECK_THROWS_WITH_AS(Vocabulary::load((dir / "bad.txt").string()),
                         "vocabulary file missing #min_count header", Error);
}

TEST_CASE("feature file round trip") {
    const fs::path dir = fresh_dir("dmrm_test_feat");
    Matrix m(2, 3);
    m << 0.5, -1.25, 3.0, 0.0, 2.5, -0.75;
    const std::string path = (dir / "img.feat").string();
    write_feature_file(path, m);
    const Matrix back = read_feature_file(path);
    REQUIRE(back.rows() == 2);
    REQUIRE(back.cols() == 3);
    for (int r = 0; r < 2; ++r)
        for (int c = 0; c < 3; ++c) CHECK(back(r, c) == m(r, c));

    SUBCASE("bad magic is rejected") {
        std::ofstream out((dir / "junk.feat").string(), std::ios::binary);
        out << "NOTAFEAT00000000";
        out.close();
        CHECK_THROWS_AS(read_feature_file((dir / "junk.feat").string()), Error);
    }

    SUBCASE("non-finite entries are rejected on read") {
        Matrix bad(1, 2);
        bad << 1.0, std::numeric_limits<double>::quiet_NaN();
        write_feature_file((dir / "nan.feat").string(), bad);
        CHECK_THROWS_WITH_AS(read_feature_file((dir / "nan.feat").string()),
                             ("non-finite value in feature file: " + (dir / "nan.feat").string())
                                 .c_str(),
                             Error);
    }
}

TEST_CASE("dataset JSON round trip and schema validation") {
    RawDataset ds;
    ds.num_candidates = 2;
    RawDialog d;
    d.image_id = "img0";
    d.caption = "a red circle";
    RawRound r;
    r.question = "what color is it";
    r.answer = "red";
    r.candidates = {"blue", "red"};
    r.gt_index = 1;
    r.slice = "attribute";
    d.rounds.push_back(r);
    ds.dialogs.push_back(d);

    const fs::path dir = fresh_dir("dmrm_test_ds");
    const std::string path = (dir / "dataset.json").string();
    write_dataset_json(ds, path);
    const RawDataset back = read_dataset_json(path);
    REQUIRE(back.dialogs.size() == 1);
    CHECK(back.num_candidates == 2);
    CHECK(back.dialogs[0].image_id == "img0");
    CHECK(back.dialogs[0].caption == "a red circle");
    REQUIRE(back.dialogs[0].rounds.size() == 1);
    CHECK(back.dialogs[0].rounds[0].question == r.question);
    CHECK(back.dialogs[0].rounds[0].answer == r.answer);
    CHECK(back.dialogs[0].rounds[0].candidates == r.candidates);
    CHECK(back.dialogs[0].rounds[0].gt_index == 1);
    CHECK(back.dialogs[0].rounds[0].slice == "attribute");

    SUBCASE("gt_index out of range is a schema error") {
        RawDataset bad = ds;
        bad.dialogs[0].rounds[0].gt_index = 2;
        write_dataset_json(bad, path);
        CHECK_THROWS_AS(read_dataset_json(path), Error);
    }

    SUBCASE("candidate count mismatch against the declared protocol") {
        RawDataset bad = ds;
        bad.dialogs[0].rounds[0].candidates = {"blue", "red", "green"};
        bad.dialogs[0].rounds[0].gt_index = 1;
        write_dataset_json(bad, path);
        CHECK_THROWS_AS(read_dataset_json(path), Error);
    }

    SUBCASE("missing feature file names the image") {
        const Vocabulary vocab = build_vocabulary({{"red", "blue"}}, 1);
        CHECK_THROWS_WITH_AS(load_corpus(path, dir.string(), vocab, "train"),
                             "missing features: img0", Error);
    }
}

TEST_CASE("corpus_from_raw validates invariants") {
    RawDataset ds;
    RawDialog d;
    d.image_id = "a";
    d.caption = "red circle";
    RawRound r;
    r.question = "what color";
    r.answer = "red";
    r.candidates = {"red", "blue"};
    r.gt_index = 0;
    d.rounds.push_back(r);
    ds.dialogs.push_back(d);
    const Vocabulary vocab = build_vocabulary({{"red", "blue", "circle", "what", "color"}}, 1);

    SUBCASE("feature shapes must agree across the corpus") {
        RawDataset two = ds;
        RawDialog d2 = d;
        d2.image_id = "b";
        two.dialogs.push_back(d2);
        std::map<std::string, Matrix> feats;
        feats["a"] = Matrix::Ones(2, 3);
        feats["b"] = Matrix::Ones(2, 4);
        CHECK_THROWS_AS(corpus_from_raw(two, feats, vocab, "train"), Error);
    }

    SUBCASE("non-finite features are rejected") {
        std::map<std::string, Matrix> feats;
        Matrix m = Matrix::Ones(2, 3);
        m(1, 1) = std::numeric_limits<double>::infinity();
        feats["a"] = m;
        CHECK_THROWS_AS(corpus_from_raw(ds, feats, vocab, "train"), Error);
    }

    SUBCASE("gt candidate must tokenize to the answer") {
        RawDataset bad = ds;
        bad.dialogs[0].rounds[0].candidates = {"blue", "red"};  // gt_index still 0
        std::map<std::string, Matrix> feats{{"a", Matrix::Ones(2, 3)}};
        CHECK_THROWS_AS(corpus_from_raw(bad, feats, vocab, "train"), Error);
    }

    SUBCASE("well-formed input materializes") {
        std::map<std::string, Matrix> feats{{"a", Matrix::Ones(2, 3)}};
        const Corpus c = corpus_from_raw(ds, feats, vocab, "train");
        CHECK(c.dialogs.size() == 1);
        CHECK(c.feature_objects() == 2);
        CHECK(c.feature_dim() == 3);
        CHECK(c.total_rounds() == 1);
        const DialogRound& cr = c.dialogs[0].rounds[0];
        CHECK(cr.candidate_ids[static_cast<std::size_t>(cr.gt_index)] == cr.answer_ids);
    }
}

TEST_CASE("synthetic generator") {
    SynthConfig cfg;
    cfg.num_dialogs = 12;
    cfg.rounds_per_dialog = 3;
    cfg.objects_per_image = 5;
    cfg.num_candidates = 8;
    cfg.seed = 42;

    const SyntheticCorpus sc = generate_synthetic_corpus(cfg);

    SUBCASE("deterministic given the seed") {
        const SyntheticCorpus sc2 = generate_synthetic_corpus(cfg);
        REQUIRE(sc.raw.dialogs.size() == sc2.raw.dialogs.size());
        for (std::size_t i = 0; i < sc.raw.dialogs.size(); ++i) {
            CHECK(sc.raw.dialogs[i].caption == sc2.raw.dialogs[i].caption);
            for (std::size_t r = 0; r < sc.raw.dialogs[i].rounds.size(); ++r) {
                CHECK(sc.raw.dialogs[i].rounds[r].question == sc2.raw.dialogs[i].rounds[r].question);
                CHECK(sc.raw.dialogs[i].rounds[r].candidates ==
                      sc2.raw.dialogs[i].rounds[r].candidates);
                CHECK(sc.raw.dialogs[i].rounds[r].gt_index == sc2.raw.dialogs[i].rounds[r].gt_index);
            }
        }
        const SyntheticCorpus sc3 = generate_synthetic_corpus([&] {
            SynthConfig c = cfg;
            c.seed = 43;
            return c;
        }());
        CHECK(sc3.raw.dialogs[0].caption != sc.raw.dialogs[0].caption);
    }

    SUBCASE("round arithmetic and slices alternate") {
        CHECK(sc.corpus.total_rounds() == 12 * 3);
        for (const auto& d : sc.corpus.dialogs) {
            for (std::size_t r = 0; r < d.rounds.size(); ++r)
                CHECK(d.rounds[r].slice == (r % 2 == 0 ? "attribute" : "coreference"));
        }
    }

    SUBCASE("scene-graph truth replays every coreference answer") {
        REQUIRE(sc.truth.size() == sc.raw.dialogs.size());
        for (std::size_t di = 0; di < sc.truth.size(); ++di) {
            const SyntheticDialogTruth& truth = sc.truth[di];
            for (std::size_t r = 0; r < truth.rounds.size(); ++r) {
                const SyntheticRoundTruth& rt = truth.rounds[r];
                const SceneObject& obj = truth.objects[static_cast<std::size_t>(rt.referent)];
                const std::string expected =
                    rt.attribute == 0 ? cfg.space.colors[static_cast<std::size_t>(obj.color)]
                                      : cfg.space.positions[static_cast<std::size_t>(obj.position)];
                CHECK(sc.raw.dialogs[di].rounds[r].answer == expected);
                if (rt.coreference) {
                    const SyntheticRoundTruth& prev = truth.rounds[r - 1];
                    CHECK(rt.referent == prev.referent);
                    CHECK(rt.attribute == 1 - prev.attribute);
                }
            }
        }
    }

    SUBCASE("candidates contain the answer exactly once, at gt_index") {
        for (const auto& d : sc.raw.dialogs) {
            for (const auto& r : d.rounds) {
                CHECK(static_cast<int>(r.candidates.size()) == cfg.num_candidates);
                int hits = 0;
                for (const auto& c : r.candidates) hits += c == r.answer ? 1 : 0;
                CHECK(hits == 1);
                CHECK(r.candidates[static_cast<std::size_t>(r.gt_index)] == r.answer);
            }
        }
    }

    SUBCASE("features are one-hot triples over distinct shapes") {
        const int shape_w = static_cast<int>(cfg.space.shapes.size());
        for (const auto& [id, m] : sc.features) {
            CHECK(m.rows() == cfg.objects_per_image);
            CHECK(m.cols() == cfg.space.width());
            std::vector<bool> seen(static_cast<std::size_t>(shape_w), false);
            for (int r = 0; r < m.rows(); ++r) {
                CHECK(m.row(r).sum() == 3.0);
                int shape = -1;
                for (int c = 0; c < shape_w; ++c)
                    if (m(r, c) == 1.0) shape = c;
                REQUIRE(shape >= 0);
                CHECK_FALSE(seen[static_cast<std::size_t>(shape)]);
                seen[static_cast<std::size_t>(shape)] = true;
            }
        }
    }

    SUBCASE("capacity limits are enforced") {
        SynthConfig bad = cfg;
        bad.objects_per_image = static_cast<int>(cfg.space.shapes.size()) + 1;
        CHECK_THROWS_AS(generate_synthetic_corpus(bad), Error);
        bad = cfg;
        bad.objects_per_image = 0;
        CHECK_THROWS_AS(generate_synthetic_corpus(bad), Error);
        bad = cfg;
        bad.num_candidates = 1;
        CHECK_THROWS_AS(generate_synthetic_corpus(bad), Error);
    }
}

TEST_CASE("save_corpus then load_corpus round-trips structure") {
    SynthConfig cfg;
    cfg.num_dialogs = 3;
    cfg.rounds_per_dialog = 2;
    cfg.objects_per_image = 4;
    cfg.num_candidates = 6;
    cfg.seed = 5;
    const SyntheticCorpus sc = generate_synthetic_corpus(cfg);

    const fs::path dir = fresh_dir("dmrm_test_roundtrip");
    save_corpus(sc.corpus, dir.string());

    const Vocabulary vocab = Vocabulary::load((dir / "vocab.txt").string());
    CHECK(vocab.fingerprint() == sc.corpus.vocab.fingerprint());

    const Corpus back = load_corpus((dir / "dataset.json").string(), (dir / "features").string(),
                                    vocab, "train");
    REQUIRE(back.dialogs.size() == sc.corpus.dialogs.size());
    for (std::size_t i = 0; i < back.dialogs.size(); ++i) {
        CHECK(back.dialogs[i].image_id == sc.corpus.dialogs[i].image_id);
        CHECK(back.dialogs[i].caption_ids == sc.corpus.dialogs[i].caption_ids);
        REQUIRE(back.dialogs[i].rounds.size() == sc.corpus.dialogs[i].rounds.size());
        for (std::size_t r = 0; r < back.dialogs[i].rounds.size(); ++r) {
            const DialogRound& x = back.dialogs[i].rounds[r];
            const DialogRound& y = sc.corpus.dialogs[i].rounds[r];
            CHECK(x.question_ids == y.question_ids);
            CHECK(x.answer_ids == y.answer_ids);
            CHECK(x.candidate_ids == y.candidate_ids);
            CHECK(x.gt_index == y.gt_index);
            CHECK(x.slice == y.slice);
        }
    }
    for (const auto& [id, f] : sc.corpus.features) {
        const ImageFeatures& g = back.features_for(id);
        CHECK((g.matrix - f.matrix).cwiseAbs().maxCoeff() == 0.0);
    }
}

TEST_CASE("fnv1a64 is stable and order-sensitive") {
    const char a[] = "abc";
    const char b[] = "acb";
    CHECK(fnv1a64(a, 3) == fnv1a64(a, 3));
    CHECK(fnv1a64(a, 3) != fnv1a64(b, 3));
    CHECK(fnv1a64(a, 3) != fnv1a64(a, 2));
}
