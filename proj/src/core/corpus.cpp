#include "corpus.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

namespace dmrm {

// ---- text preprocessing ----

std::string lowercase_ascii(const std::string& s) {
    std::string out = s;
    for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

namespace {

const char* kSmallNumbers[] = {
    "zero", "one",  "two",    "three",    "four",     "five",    "six",
    "seven", "eight", "nine",  "ten",      "eleven",   "twelve",  "thirteen",
    "fourteen", "fifteen", "sixteen", "seventeen", "eighteen", "nineteen", "twenty"};

std::string number_word(long value) {
    if (value >= 0 && value <= 20) return kSmallNumbers[value];
    if (value < 100 && value % 10 == 0) {
        switch (value / 10) {
            case 3: return "thirty";
            case 4: return "forty";
            case 5: return "fifty";
            case 6: return "sixty";
            case 7: return "seventy";
            case 8: return "eighty";
            case 9: return "ninety";
        }
    }
    if (value == 100) return "hundred";
    return "";
}

}  // namespace

std::string digits_to_words(const std::string& s) {
    std::string out;
    std::size_t i = 0;
    while (i < s.size()) {
        if (!std::isdigit(static_cast<unsigned char>(s[i]))) {
            out += s[i++];
            continue;
        }
        std::size_t j = i;
        while (j < s.size() && std::isdigit(static_cast<unsigned char>(s[j]))) ++j;
        const std::string run = s.substr(i, j - i);
        std::string words;
        if (run.size() <= 3) {
            words = number_word(std::stol(run));
        }
        if (words.empty()) {
            // long or irregular runs become per-digit words
            for (std::size_t k = 0; k < run.size(); ++k) {
                if (k) words += ' ';
                words += kSmallNumbers[run[k] - '0'];
            }
        }
        if (!out.empty() && out.back() != ' ') out += ' ';
        out += words;
        if (j < s.size() && s[j] != ' ') out += ' ';
        i = j;
    }
    return out;
}

std::string remove_contractions(const std::string& s) {
    static const std::vector<std::pair<std::string, std::string>> kWhole = {
        {"won't", "will not"}, {"can't", "cannot"}, {"shan't", "shall not"}};
    static const std::vector<std::pair<std::string, std::string>> kSuffix = {
        {"n't", " not"}, {"'re", " are"}, {"'ve", " have"},
        {"'ll", " will"}, {"'d", " would"}, {"'m", " am"}};

    std::vector<std::string> tokens = whitespace_tokenize(s);
    std::string out;
    for (const std::string& tk : tokens) {
        std::string w = tk;
        for (const auto& [from, to] : kWhole) {
            if (w == from) {
                w = to;
                break;
            }
        }
        for (const auto& [from, to] : kSuffix) {
            if (w.size() > from.size() && w.compare(w.size() - from.size(), from.size(), from) == 0) {
                w = w.substr(0, w.size() - from.size()) + to;
                break;
            }
        }
        // strip any apostrophes that survive the maps (possessives etc.)
        std::string cleaned;
        for (char c : w)
            if (c != '\'') cleaned += c;
        if (!out.empty()) out += ' ';
        out += cleaned;
    }
    return out;
}

std::vector<std::string> whitespace_tokenize(const std::string& s) {
    std::vector<std::string> out;
    std::istringstream iss(s);
    std::string tok;
    while (iss >> tok) out.push_back(tok);
    return out;
}

std::vector<std::string> preprocess_text(const std::string& s) {
    return whitespace_tokenize(remove_contractions(digits_to_words(lowercase_ascii(s))));
}

int truncation_cap(TextRole role) {
    switch (role) {
        case TextRole::kCaption: return 24;
        case TextRole::kQuestion: return 16;
        case TextRole::kAnswer: return 8;
    }
    fail("unknown text role");
}

// ---- vocabulary ----

namespace {
const char* kSpecialTokens[] = {"<pad>", "<unk>", "<bos>", "<eos>"};
}

int Vocabulary::id(const std::string& token) const {
    auto it = token_to_id.find(token);
    return it == token_to_id.end() ? kUnk : it->second;
}

const std::string& Vocabulary::token(int tid) const {
    require(tid >= 0 && tid < size(), "token id out of range");
    return id_to_token[static_cast<std::size_t>(tid)];
}

std::uint64_t Vocabulary::fingerprint() const {
    std::uint64_t h = fnv1a64(&min_count, sizeof(min_count));
    for (const std::string& t : id_to_token) {
        h = fnv1a64(t.data(), t.size(), h);
        const char nl = '\n';
        h = fnv1a64(&nl, 1, h);
    }
    return h;
}

void Vocabulary::save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    require(out.good(), "cannot open vocabulary file for writing: " + path);
    out << "#min_count=" << min_count << "\n";
    for (const std::string& t : id_to_token) out << t << "\n";
    require(out.good(), "failed writing vocabulary file: " + path);
}

Vocabulary Vocabulary::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    require(in.good(), "cannot open vocabulary file: " + path);
    std::string header;
    std::getline(in, header);
    require(header.rfind("#min_count=", 0) == 0, "vocabulary file missing #min_count header");
    Vocabulary v;
    v.min_count = std::stoi(header.substr(std::strlen("#min_count=")));
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() && in.eof()) break;
        v.token_to_id[line] = v.size();
        v.id_to_token.push_back(line);
    }
    require(v.size() >= kNumSpecials, "vocabulary file too short");
    for (int i = 0; i < kNumSpecials; ++i)
        require(v.id_to_token[static_cast<std::size_t>(i)] == kSpecialTokens[i],
                "vocabulary file lacks the special tokens in canonical order");
    return v;
}

Vocabulary build_vocabulary(const std::vector<std::vector<std::string>>& token_streams,
                            int min_count) {
    bool any = false;
    std::map<std::string, std::int64_t> counts;
    for (const auto& stream : token_streams) {
        for (const std::string& t : stream) {
            any = true;
            ++counts[t];
        }
    }
    require(any, "empty training corpus");

    std::vector<std::pair<std::string, std::int64_t>> kept;
    for (const auto& [tok, cnt] : counts)
        if (cnt >= min_count) kept.emplace_back(tok, cnt);
    std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });

    Vocabulary v;
    v.min_count = min_count;
    for (const char* sp : kSpecialTokens) {
        v.token_to_id[sp] = v.size();
        v.id_to_token.push_back(sp);
    }
    for (const auto& [tok, cnt] : kept) {
        if (v.token_to_id.count(tok)) continue;  // text that collides with a special
        v.token_to_id[tok] = v.size();
        v.id_to_token.push_back(tok);
    }
    return v;
}

std::vector<int> tokenize_and_truncate(const Vocabulary& vocab, const std::string& text,
                                       TextRole role) {
    std::vector<std::string> tokens = preprocess_text(text);
    const std::size_t cap = static_cast<std::size_t>(truncation_cap(role));
    if (tokens.size() > cap) tokens.resize(cap);
    std::vector<int> ids;
    ids.reserve(tokens.size());
    for (const std::string& t : tokens) ids.push_back(vocab.id(t));
    return ids;
}

std::string detokenize(const Vocabulary& vocab, const std::vector<int>& ids) {
    std::string out;
    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (i) out += ' ';
        out += vocab.token(ids[i]);
    }
    return out;
}

// ---- corpus ----

int Corpus::feature_objects() const {
    require(!features.empty(), "corpus has no image features");
    return features.begin()->second.objects();
}

int Corpus::feature_dim() const {
    require(!features.empty(), "corpus has no image features");
    return features.begin()->second.dim();
}

const ImageFeatures& Corpus::features_for(const std::string& image_id) const {
    auto it = features.find(image_id);
    if (it == features.end()) fail("missing features: " + image_id);
    return it->second;
}

std::size_t Corpus::total_rounds() const {
    std::size_t n = 0;
    for (const auto& d : dialogs) n += d.rounds.size();
    return n;
}

RawDataset read_dataset_json(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    require(in.good(), "cannot open dataset file: " + path);
    ordered_json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        fail("dataset JSON parse error in " + path + ": " + e.what());
    }

    RawDataset ds;
    require(j.is_object() && j.contains("version") && j.contains("dialogs"),
            "dataset schema error: expected {version, dialogs}");
    ds.version = j["version"].get<std::string>();
    require(ds.version == "1.0", "unsupported dataset version: " + ds.version);
    if (j.contains("num_candidates")) ds.num_candidates = j["num_candidates"].get<int>();

    for (const auto& jd : j["dialogs"]) {
        RawDialog d;
        d.image_id = jd.at("image_id").get<std::string>();
        d.caption = jd.at("caption").get<std::string>();
        require(jd.contains("rounds") && !jd["rounds"].empty(),
                "dataset schema error: dialog " + d.image_id + " has no rounds");
        for (const auto& jr : jd["rounds"]) {
            RawRound r;
            r.question = jr.at("question").get<std::string>();
            r.answer = jr.at("answer").get<std::string>();
            for (const auto& c : jr.at("candidates")) r.candidates.push_back(c.get<std::string>());
            r.gt_index = jr.at("gt_index").get<int>();
            if (jr.contains("slice")) r.slice = jr["slice"].get<std::string>();
            require(r.gt_index >= 0 && r.gt_index < static_cast<int>(r.candidates.size()),
                    "dataset schema error: gt_index out of range in dialog " + d.image_id);
            if (ds.num_candidates > 0)
                require(static_cast<int>(r.candidates.size()) == ds.num_candidates,
                        "dataset schema error: dialog " + d.image_id + " declares " +
                            std::to_string(ds.num_candidates) + " candidates but a round has " +
                            std::to_string(r.candidates.size()));
            d.rounds.push_back(std::move(r));
        }
        ds.dialogs.push_back(std::move(d));
    }
    return ds;
}

void write_dataset_json(const RawDataset& ds, const std::string& path) {
    ordered_json j;
    j["version"] = ds.version;
    if (ds.num_candidates > 0) j["num_candidates"] = ds.num_candidates;
    j["dialogs"] = ordered_json::array();
    for (const auto& d : ds.dialogs) {
        ordered_json jd;
        jd["image_id"] = d.image_id;
        jd["caption"] = d.caption;
        jd["rounds"] = ordered_json::array();
        for (const auto& r : d.rounds) {
            ordered_json jr;
            jr["question"] = r.question;
            jr["answer"] = r.answer;
            jr["candidates"] = r.candidates;
            jr["gt_index"] = r.gt_index;
            if (!r.slice.empty()) jr["slice"] = r.slice;
            jd["rounds"].push_back(std::move(jr));
        }
        j["dialogs"].push_back(std::move(jd));
    }
    std::ofstream out(path, std::ios::binary);
    require(out.good(), "cannot open dataset file for writing: " + path);
    out << j.dump(2) << "\n";
    require(out.good(), "failed writing dataset file: " + path);
}

namespace {

constexpr char kFeatMagic[8] = {'D', 'M', 'R', 'M', 'F', 'E', 'A', 'T'};

void put_u32(std::ofstream& out, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                          static_cast<unsigned char>((v >> 8) & 0xff),
                          static_cast<unsigned char>((v >> 16) & 0xff),
                          static_cast<unsigned char>((v >> 24) & 0xff)};
    out.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32(std::ifstream& in) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

}  // namespace

void write_feature_file(const std::string& path, const Matrix& kxv) {
    require(kxv.rows() >= 1 && kxv.cols() >= 1, "feature matrix must be at least 1x1");
    std::ofstream out(path, std::ios::binary);
    require(out.good(), "cannot open feature file for writing: " + path);
    out.write(kFeatMagic, 8);
    put_u32(out, static_cast<std::uint32_t>(kxv.rows()));
    put_u32(out, static_cast<std::uint32_t>(kxv.cols()));
    for (int r = 0; r < kxv.rows(); ++r) {
        for (int c = 0; c < kxv.cols(); ++c) {
            const float f = static_cast<float>(kxv(r, c));
            static_assert(sizeof(float) == 4);
            out.write(reinterpret_cast<const char*>(&f), 4);
        }
    }
    require(out.good(), "failed writing feature file: " + path);
}

Matrix read_feature_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    require(in.good(), "cannot open feature file: " + path);
    char magic[8];
    in.read(magic, 8);
    require(in.good() && std::memcmp(magic, kFeatMagic, 8) == 0,
            "bad feature file magic: " + path);
    const std::uint32_t k = get_u32(in);
    const std::uint32_t v = get_u32(in);
    require(in.good() && k >= 1 && v >= 1, "bad feature file header: " + path);
    Matrix m(static_cast<int>(k), static_cast<int>(v));
    for (std::uint32_t r = 0; r < k; ++r) {
        for (std::uint32_t c = 0; c < v; ++c) {
            float f;
            in.read(reinterpret_cast<char*>(&f), 4);
            require(in.good(), "truncated feature file: " + path);
            require(std::isfinite(f), "non-finite value in feature file: " + path);
            m(static_cast<int>(r), static_cast<int>(c)) = static_cast<double>(f);
        }
    }
    return m;
}

Corpus corpus_from_raw(const RawDataset& raw, const std::map<std::string, Matrix>& features,
                       const Vocabulary& vocab, const std::string& split) {
    Corpus corpus;
    corpus.vocab = vocab;
    corpus.split = split;

    for (const auto& rd : raw.dialogs) {
        DialogInstance d;
        d.image_id = rd.image_id;
        d.caption_ids = tokenize_and_truncate(vocab, rd.caption, TextRole::kCaption);
        for (const auto& rr : rd.rounds) {
            DialogRound r;
            r.question_ids = tokenize_and_truncate(vocab, rr.question, TextRole::kQuestion);
            r.answer_ids = tokenize_and_truncate(vocab, rr.answer, TextRole::kAnswer);
            for (const auto& c : rr.candidates)
                r.candidate_ids.push_back(tokenize_and_truncate(vocab, c, TextRole::kAnswer));
            r.gt_index = rr.gt_index;
            r.slice = rr.slice;
            require(r.candidate_ids[static_cast<std::size_t>(r.gt_index)] == r.answer_ids,
                    "dataset schema error: gt candidate differs from answer in dialog " +
                        d.image_id);
            d.rounds.push_back(std::move(r));
        }
        require(!d.rounds.empty(), "dataset schema error: dialog without rounds");
        corpus.dialogs.push_back(std::move(d));
    }

    int k = -1, v = -1;
    for (const auto& d : corpus.dialogs) {
        auto it = features.find(d.image_id);
        if (it == features.end()) fail("missing features: " + d.image_id);
        if (corpus.features.count(d.image_id)) continue;
        const Matrix& m = it->second;
        require(m.allFinite(), "non-finite features for image " + d.image_id);
        if (k < 0) {
            k = static_cast<int>(m.rows());
            v = static_cast<int>(m.cols());
        } else {
            require(static_cast<int>(m.rows()) == k && static_cast<int>(m.cols()) == v,
                    "feature shape mismatch for image " + d.image_id +
                        ": object count and width must be fixed across the corpus");
        }
        corpus.features[d.image_id] = ImageFeatures{d.image_id, m};
    }
    return corpus;
}

Corpus load_corpus(const std::string& dataset_path, const std::string& features_dir,
                   const Vocabulary& vocab, const std::string& split) {
    RawDataset raw = read_dataset_json(dataset_path);
    std::map<std::string, Matrix> feats;
    for (const auto& d : raw.dialogs) {
        if (feats.count(d.image_id)) continue;
        const fs::path fp = fs::path(features_dir) / (d.image_id + ".feat");
        if (!fs::exists(fp)) fail("missing features: " + d.image_id);
        feats[d.image_id] = read_feature_file(fp.string());
    }
    return corpus_from_raw(raw, feats, vocab, split);
}

void save_corpus(const Corpus& corpus, const std::string& out_dir) {
    fs::create_directories(fs::path(out_dir) / "features");

    RawDataset raw;
    for (const auto& d : corpus.dialogs) {
        RawDialog rd;
        rd.image_id = d.image_id;
        rd.caption = detokenize(corpus.vocab, d.caption_ids);
        for (const auto& r : d.rounds) {
            RawRound rr;
            rr.question = detokenize(corpus.vocab, r.question_ids);
            rr.answer = detokenize(corpus.vocab, r.answer_ids);
            for (const auto& c : r.candidate_ids) rr.candidates.push_back(detokenize(corpus.vocab, c));
            rr.gt_index = r.gt_index;
            rr.slice = r.slice;
            rd.rounds.push_back(std::move(rr));
        }
        raw.dialogs.push_back(std::move(rd));
    }
    write_dataset_json(raw, (fs::path(out_dir) / "dataset.json").string());
    corpus.vocab.save((fs::path(out_dir) / "vocab.txt").string());
    for (const auto& [id, f] : corpus.features)
        write_feature_file((fs::path(out_dir) / "features" / (id + ".feat")).string(), f.matrix);
}

// ---- synthetic generator ----

AttributeSpace AttributeSpace::standard() {
    AttributeSpace s;
    s.shapes = {"circle", "square", "triangle", "star", "hexagon", "diamond", "ring", "cross"};
    s.colors = {"red", "blue", "green", "yellow", "purple", "orange", "black", "white"};
    s.positions = {"left", "right", "top", "bottom", "center", "corner"};
    return s;
}

int AttributeSpace::width() const {
    return static_cast<int>(shapes.size() + colors.size() + positions.size());
}

namespace {

Matrix scene_features(const std::vector<SceneObject>& objects, const AttributeSpace& space) {
    const int v = space.width();
    Matrix m = Matrix::Zero(static_cast<int>(objects.size()), v);
    const int color_base = static_cast<int>(space.shapes.size());
    const int pos_base = color_base + static_cast<int>(space.colors.size());
    for (std::size_t i = 0; i < objects.size(); ++i) {
        const auto& o = objects[i];
        m(static_cast<int>(i), o.shape) = 1.0;
        m(static_cast<int>(i), color_base + o.color) = 1.0;
        m(static_cast<int>(i), pos_base + o.position) = 1.0;
    }
    return m;
}

std::string attribute_word(const SceneObject& o, int attribute, const AttributeSpace& space) {
    return attribute == 0 ? space.colors[static_cast<std::size_t>(o.color)]
                          : space.positions[static_cast<std::size_t>(o.position)];
}

std::string attribute_question(int attribute, const std::string& subject) {
    return attribute == 0 ? "what color is " + subject : "where is " + subject;
}

}  // namespace

SyntheticCorpus generate_synthetic_corpus(const SynthConfig& cfg) {
    const AttributeSpace& space = cfg.space;
    require(cfg.num_dialogs >= 1, "num_dialogs must be >= 1");
    require(cfg.rounds_per_dialog >= 1, "rounds_per_dialog must be >= 1");
    require(cfg.objects_per_image >= 1, "objects per image (K) must be >= 1");
    require(cfg.objects_per_image <= static_cast<int>(space.shapes.size()),
            "K larger than attribute space capacity: " + std::to_string(cfg.objects_per_image) +
                " objects but only " + std::to_string(space.shapes.size()) + " distinct shapes");
    const int pool =
        static_cast<int>(space.colors.size() + space.positions.size() + space.shapes.size());
    require(cfg.num_candidates >= 2 && cfg.num_candidates <= pool,
            "num_candidates must be in [2, " + std::to_string(pool) + "]");

    Rng rng(cfg.seed);
    SyntheticCorpus out;
    out.raw.num_candidates = cfg.num_candidates;

    // the full word pool, used for candidate distractors
    std::vector<std::string> all_words;
    all_words.insert(all_words.end(), space.colors.begin(), space.colors.end());
    all_words.insert(all_words.end(), space.positions.begin(), space.positions.end());
    all_words.insert(all_words.end(), space.shapes.begin(), space.shapes.end());

    for (int d = 0; d < cfg.num_dialogs; ++d) {
        SyntheticDialogTruth truth;

        // K objects with distinct shapes
        std::vector<int> shape_ids(space.shapes.size());
        for (std::size_t i = 0; i < shape_ids.size(); ++i) shape_ids[i] = static_cast<int>(i);
        rng.shuffle(shape_ids);
        for (int k = 0; k < cfg.objects_per_image; ++k) {
            SceneObject o;
            o.shape = shape_ids[static_cast<std::size_t>(k)];
            o.color = static_cast<int>(rng.uniform_int(0, static_cast<std::int64_t>(space.colors.size()) - 1));
            o.position = static_cast<int>(
                rng.uniform_int(0, static_cast<std::int64_t>(space.positions.size()) - 1));
            truth.objects.push_back(o);
        }
        truth.salient = static_cast<int>(rng.uniform_int(0, cfg.objects_per_image - 1));

        RawDialog dialog;
        char buf[32];
        std::snprintf(buf, sizeof(buf), "synth_%06d", d);
        dialog.image_id = buf;
        const SceneObject& sal = truth.objects[static_cast<std::size_t>(truth.salient)];
        dialog.caption = "a " + space.colors[static_cast<std::size_t>(sal.color)] + " " +
                         space.shapes[static_cast<std::size_t>(sal.shape)] + " in the " +
                         space.positions[static_cast<std::size_t>(sal.position)];

        for (int r = 0; r < cfg.rounds_per_dialog; ++r) {
            SyntheticRoundTruth rt;
            RawRound round;
            if (r % 2 == 0) {
                rt.coreference = false;
                rt.referent = static_cast<int>(rng.uniform_int(0, cfg.objects_per_image - 1));
                rt.attribute = static_cast<int>(rng.uniform_int(0, 1));
                const SceneObject& obj = truth.objects[static_cast<std::size_t>(rt.referent)];
                round.question = attribute_question(
                    rt.attribute, "the " + space.shapes[static_cast<std::size_t>(obj.shape)]);
                rt.answer = attribute_word(obj, rt.attribute, space);
                round.slice = "attribute";
            } else {
                const SyntheticRoundTruth& prev = truth.rounds.back();
                rt.coreference = true;
                rt.referent = prev.referent;
                rt.attribute = 1 - prev.attribute;
                const SceneObject& obj = truth.objects[static_cast<std::size_t>(rt.referent)];
                round.question = attribute_question(rt.attribute, "it");
                rt.answer = attribute_word(obj, rt.attribute, space);
                round.slice = "coreference";
            }
            round.answer = rt.answer;

            // candidate list: the answer plus distinct distractor words
            std::vector<std::string> distractors;
            for (const std::string& w : all_words)
                if (w != rt.answer) distractors.push_back(w);
            rng.shuffle(distractors);
            round.candidates.assign(distractors.begin(),
                                    distractors.begin() + (cfg.num_candidates - 1));
            round.candidates.push_back(rt.answer);
            rng.shuffle(round.candidates);
            for (std::size_t c = 0; c < round.candidates.size(); ++c)
                if (round.candidates[c] == rt.answer) round.gt_index = static_cast<int>(c);

            truth.rounds.push_back(rt);
            dialog.rounds.push_back(std::move(round));
        }

        out.features[dialog.image_id] = scene_features(truth.objects, space);
        out.raw.dialogs.push_back(std::move(dialog));
        out.truth.push_back(std::move(truth));
    }

    // vocabulary over every generated text stream, min_count 1
    std::vector<std::vector<std::string>> streams;
    for (const auto& d : out.raw.dialogs) {
        streams.push_back(preprocess_text(d.caption));
        for (const auto& r : d.rounds) {
            streams.push_back(preprocess_text(r.question));
            streams.push_back(preprocess_text(r.answer));
            for (const auto& c : r.candidates) streams.push_back(preprocess_text(c));
        }
    }
    Vocabulary vocab = build_vocabulary(streams, 1);
    out.corpus = corpus_from_raw(out.raw, out.features, vocab, "train");
    return out;
}

std::uint64_t fnv1a64(const void* data, std::size_t len, std::uint64_t seed) {
    const auto* p = static_cast<const unsigned char*>(data);
    std::uint64_t h = seed;
    for (std::size_t i = 0; i < len; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ull;
    }
    return h;
}

}  // namespace dmrm
