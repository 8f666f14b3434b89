#include "encoder.hpp"

#include <fstream>
#include <sstream>

namespace dmrm {

namespace {
const char* role_name(int i) {
    static const char* names[] = {"q", "h", "a"};
    return names[i];
}
}  // namespace

EncoderModule::EncoderModule(ParameterStore& ps, int vocab_size, int embed_dim, int hidden,
                             Rng& rng)
    : embed_dim_(embed_dim), hidden_(hidden) {
    require(hidden % 2 == 0, "encoder hidden width must be even (two directions)");
    require(vocab_size >= Vocabulary::kNumSpecials, "vocabulary too small");
    embedding_ = &ps.create_uniform("embed.w", embed_dim, vocab_size, embed_dim, rng);
    embedding_->value.col(Vocabulary::kPad).setZero();
    embedding_->frozen_cols.push_back(Vocabulary::kPad);
    const int h = hidden / 2;
    for (int i = 0; i < 3; ++i) {
        fwd_[i] = nn::LstmCell::create(ps, std::string("enc.") + role_name(i) + ".fwd", embed_dim, h, rng);
        bwd_[i] = nn::LstmCell::create(ps, std::string("enc.") + role_name(i) + ".bwd", embed_dim, h, rng);
    }
}

EncoderModule::EncoderModule(ParameterStore& ps, int vocab_size, int embed_dim, int hidden)
    : embed_dim_(embed_dim), hidden_(hidden) {
    require(hidden % 2 == 0, "encoder hidden width must be even (two directions)");
    embedding_ = &ps.get("embed.w");
    require(embedding_->value.rows() == embed_dim && embedding_->value.cols() == vocab_size,
            "embedding shape mismatch");
    for (int i = 0; i < 3; ++i) {
        fwd_[i] = nn::LstmCell::lookup(ps, std::string("enc.") + role_name(i) + ".fwd");
        bwd_[i] = nn::LstmCell::lookup(ps, std::string("enc.") + role_name(i) + ".bwd");
    }
}

int EncoderModule::load_pretrained_embeddings(const Vocabulary& vocab, const std::string& path) {
    std::ifstream in(path);
    require(in.good(), "cannot open embedding file: " + path);
    int matched = 0;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream iss(line);
        std::string token;
        iss >> token;
        if (!vocab.contains(token)) continue;
        const int id = vocab.id(token);
        if (id == Vocabulary::kPad) continue;
        Eigen::VectorXd row(embed_dim_);
        for (int i = 0; i < embed_dim_; ++i) {
            double x;
            require(static_cast<bool>(iss >> x),
                    "embedding file row for '" + token + "' has fewer than " +
                        std::to_string(embed_dim_) + " values");
            row(i) = x;
        }
        embedding_->value.col(id) = row;
        ++matched;
    }
    return matched;
}

Var EncoderModule::embed(Tape& t, const std::vector<int>& ids) const {
    return ad::embed_cols(t, t.param(*embedding_), ids);
}

EncoderModule::SeqEncoding EncoderModule::encode_sequence(Tape& t, EncoderRole role,
                                                          Var embeddings, int length) const {
    require(length >= 1, "empty sequence");
    require(length <= embeddings->cols(), "length exceeds embedding columns");
    require(embeddings->rows() == embed_dim_, "embedding width mismatch");

    const nn::LstmCell& f = fwd_cell(role);
    const nn::LstmCell& b = bwd_cell(role);

    std::vector<nn::LstmCell::State> fstates(static_cast<std::size_t>(length));
    nn::LstmCell::State s = f.zero_state(t);
    for (int j = 0; j < length; ++j) {
        s = f.step(t, ad::col(t, embeddings, j), s);
        fstates[static_cast<std::size_t>(j)] = s;
    }
    std::vector<nn::LstmCell::State> bstates(static_cast<std::size_t>(length));
    s = b.zero_state(t);
    for (int j = length - 1; j >= 0; --j) {
        s = b.step(t, ad::col(t, embeddings, j), s);
        bstates[static_cast<std::size_t>(j)] = s;
    }

    std::vector<Var> per_token(static_cast<std::size_t>(length));
    for (int j = 0; j < length; ++j)
        per_token[static_cast<std::size_t>(j)] = ad::concat_rows(
            t, {fstates[static_cast<std::size_t>(j)].h, bstates[static_cast<std::size_t>(j)].h});

    SeqEncoding enc;
    enc.states = ad::concat_cols(t, per_token);
    enc.final = ad::concat_rows(t, {fstates.back().h, bstates.front().h});
    enc.final_cell = ad::concat_rows(t, {fstates.back().c, bstates.front().c});
    return enc;
}

EncoderModule::SeqEncoding EncoderModule::encode_ids(Tape& t, EncoderRole role,
                                                     const std::vector<int>& ids) const {
    require(!ids.empty(), "empty sequence");
    Var emb = embed(t, ids);
    return encode_sequence(t, role, emb, static_cast<int>(ids.size()));
}

Var EncoderModule::encode_history(Tape& t, const DialogInstance& dialog, int upto_round) const {
    require(upto_round >= 1, "history needs at least the caption round");
    require(upto_round <= static_cast<int>(dialog.rounds.size()) + 1,
            "upto_round exceeds dialog length");
    std::vector<Var> cols;
    cols.push_back(encode_ids(t, EncoderRole::kHistory, dialog.caption_ids).final);
    for (int i = 1; i < upto_round; ++i) {
        const DialogRound& r = dialog.rounds[static_cast<std::size_t>(i - 1)];
        std::vector<int> qa = r.question_ids;
        qa.insert(qa.end(), r.answer_ids.begin(), r.answer_ids.end());
        cols.push_back(encode_ids(t, EncoderRole::kHistory, qa).final);
    }
    return ad::concat_cols(t, cols);
}

}  // namespace dmrm
