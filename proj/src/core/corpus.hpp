#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "error.hpp"
#include "params.hpp"
#include "rng.hpp"

namespace dmrm {

// ---- text preprocessing ----
// Pipeline order: lowercase, digits to words, contraction removal, whitespace
// tokenization. The pipeline is idempotent on its own output.

std::string lowercase_ascii(const std::string& s);
std::string digits_to_words(const std::string& s);
std::string remove_contractions(const std::string& s);
std::vector<std::string> whitespace_tokenize(const std::string& s);
std::vector<std::string> preprocess_text(const std::string& s);

enum class TextRole { kCaption, kQuestion, kAnswer };

// Truncation caps: caption 24, question 16, answer 8 tokens.
int truncation_cap(TextRole role);

// ---- vocabulary ----

struct Vocabulary {
    static constexpr int kPad = 0;
    static constexpr int kUnk = 1;
    static constexpr int kBos = 2;
    static constexpr int kEos = 3;
    static constexpr int kNumSpecials = 4;

    std::vector<std::string> id_to_token;
    std::map<std::string, int> token_to_id;
    int min_count = 1;

    int size() const { return static_cast<int>(id_to_token.size()); }
    int id(const std::string& token) const;
    const std::string& token(int id) const;
    bool contains(const std::string& token) const { return token_to_id.count(token) != 0; }

    // Stable content hash used to pair checkpoints with corpora.
    std::uint64_t fingerprint() const;

    void save(const std::string& path) const;
    static Vocabulary load(const std::string& path);
};

// Tokens with count >= min_count enter the vocabulary after the four
// specials, ordered by descending count with lexicographic tie-break.
Vocabulary build_vocabulary(const std::vector<std::vector<std::string>>& token_streams,
                            int min_count);

std::vector<int> tokenize_and_truncate(const Vocabulary& vocab, const std::string& text,
                                       TextRole role);
std::string detokenize(const Vocabulary& vocab, const std::vector<int>& ids);

// ---- dataset ----

struct DialogRound {
    std::vector<int> question_ids;
    std::vector<int> answer_ids;
    std::vector<std::vector<int>> candidate_ids;
    int gt_index = -1;
    std::string slice;  // optional generator tag: "attribute" or "coreference"
};

struct DialogInstance {
    std::string image_id;
    std::vector<int> caption_ids;
    std::vector<DialogRound> rounds;
};

struct ImageFeatures {
    std::string image_id;
    Matrix matrix;  // K x V, one row per object
    int objects() const { return static_cast<int>(matrix.rows()); }
    int dim() const { return static_cast<int>(matrix.cols()); }
};

struct Corpus {
    Vocabulary vocab;
    std::vector<DialogInstance> dialogs;
    std::map<std::string, ImageFeatures> features;
    std::string split = "train";

    int feature_objects() const;  // K, identical across images
    int feature_dim() const;      // V
    const ImageFeatures& features_for(const std::string& image_id) const;
    std::size_t total_rounds() const;
};

// Raw (string-level) dataset mirroring the JSON schema.
struct RawRound {
    std::string question;
    std::string answer;
    std::vector<std::string> candidates;
    int gt_index = -1;
    std::string slice;
};

struct RawDialog {
    std::string image_id;
    std::string caption;
    std::vector<RawRound> rounds;
};

struct RawDataset {
    std::string version = "1.0";
    int num_candidates = 0;  // 0 = not declared; >0 enforces the list length
    std::vector<RawDialog> dialogs;
};

RawDataset read_dataset_json(const std::string& path);
void write_dataset_json(const RawDataset& ds, const std::string& path);

// Feature file: magic "DMRMFEAT", u32 K, u32 V (little-endian), then K*V
// float32 little-endian row-major.
void write_feature_file(const std::string& path, const Matrix& kxv);
Matrix read_feature_file(const std::string& path);

// Tokenize a raw dataset against a vocabulary and attach per-image features
// from <features_dir>/<image_id>.feat. Validates the corpus invariants.
Corpus load_corpus(const std::string& dataset_path, const std::string& features_dir,
                   const Vocabulary& vocab, const std::string& split);
Corpus corpus_from_raw(const RawDataset& raw, const std::map<std::string, Matrix>& features,
                       const Vocabulary& vocab, const std::string& split);

// Inverse of load_corpus: detokenize and write dataset.json, vocab.txt and
// features/*.feat under out_dir.
void save_corpus(const Corpus& corpus, const std::string& out_dir);

// ---- synthetic generator ----

struct AttributeSpace {
    std::vector<std::string> shapes;
    std::vector<std::string> colors;
    std::vector<std::string> positions;

    static AttributeSpace standard();
    int width() const;  // one-hot feature width
};

struct SynthConfig {
    int num_dialogs = 50;
    int rounds_per_dialog = 3;
    int objects_per_image = 8;  // K
    int num_candidates = 20;
    std::uint64_t seed = 7;
    AttributeSpace space = AttributeSpace::standard();
};

struct SceneObject {
    int shape = -1;
    int color = -1;
    int position = -1;
};

// Ground truth retained by the generator; tests use it as an oracle.
struct SyntheticRoundTruth {
    bool coreference = false;
    int referent = -1;   // object index within the scene
    int attribute = 0;   // 0 = color, 1 = position
    std::string answer;
};

struct SyntheticDialogTruth {
    std::vector<SceneObject> objects;
    int salient = -1;    // object named by the caption
    std::vector<SyntheticRoundTruth> rounds;
};

struct SyntheticCorpus {
    Corpus corpus;
    RawDataset raw;
    std::map<std::string, Matrix> features;
    std::vector<SyntheticDialogTruth> truth;
};

// Deterministic given the config. Dialogs are scenes of K objects with
// distinct shapes; even rounds ask an attribute of a named shape, odd rounds
// ask the complementary attribute of "it", referring to the previous round's
// object.
SyntheticCorpus generate_synthetic_corpus(const SynthConfig& cfg);

std::uint64_t fnv1a64(const void* data, std::size_t len, std::uint64_t seed = 0xcbf29ce484222325ull);

}  // namespace dmrm
