#pragma once

#include <string>
#include <vector>

#include "ad.hpp"
#include "corpus.hpp"
#include "nn.hpp"
#include "params.hpp"

namespace dmrm {

using ad::Tape;
using ad::Var;

enum class EncoderRole { kQuestion, kHistory, kAnswer };

// Per-token embedding plus three independent single-layer BiLSTMs over a
// shared embedding table. Hidden size is D/2 per direction so concatenated
// states have width D.
class EncoderModule {
public:
    // Registers parameters in `ps`. embed_dim = E, hidden = D (must be even).
    EncoderModule(ParameterStore& ps, int vocab_size, int embed_dim, int hidden, Rng& rng);
    // Rebinds to parameters previously registered under the same names.
    EncoderModule(ParameterStore& ps, int vocab_size, int embed_dim, int hidden);

    int embed_dim() const { return embed_dim_; }
    int hidden() const { return hidden_; }
    Parameter& embedding() { return *embedding_; }

    // Replace embedding rows for tokens present in a GloVe-style text file
    // (token followed by embed_dim decimals per line). Returns the number of
    // tokens matched. The PAD row stays zero.
    int load_pretrained_embeddings(const Vocabulary& vocab, const std::string& path);

    // E x L matrix of embeddings for a token id sequence.
    Var embed(Tape& t, const std::vector<int>& ids) const;

    struct SeqEncoding {
        Var states = nullptr;     // D x length, per-token [fwd; bwd] states
        Var final = nullptr;      // D x 1, [fwd at last token; bwd at token 0]
        Var final_cell = nullptr; // D x 1, matching cell states
    };

    // Runs the role's BiLSTM over the first `length` columns of `embeddings`.
    // Columns beyond `length` are padding and never enter the recurrence.
    SeqEncoding encode_sequence(Tape& t, EncoderRole role, Var embeddings, int length) const;

    // Convenience: embed then encode a full id sequence.
    SeqEncoding encode_ids(Tape& t, EncoderRole role, const std::vector<int>& ids) const;

    // History feature columns for rounds [0, upto_round): column 0 encodes the
    // caption, column i (i>=1) encodes question_i ++ answer_i of round i-1.
    // upto_round = t yields a D x t matrix.
    Var encode_history(Tape& t, const DialogInstance& dialog, int upto_round) const;

private:
    int embed_dim_;
    int hidden_;
    Parameter* embedding_;
    nn::LstmCell fwd_[3];
    nn::LstmCell bwd_[3];

    const nn::LstmCell& fwd_cell(EncoderRole r) const { return fwd_[static_cast<int>(r)]; }
    const nn::LstmCell& bwd_cell(EncoderRole r) const { return bwd_[static_cast<int>(r)]; }
};

}  // namespace dmrm
