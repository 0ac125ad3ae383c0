#pragma once

// Recurrent cells over row-batched inputs: x is (batch x input_dim), h and c
// are (batch x hidden_dim). Gate pre-activations are x W + h U + b with the
// gate blocks laid out left to right in the order given below.
//
//   rnn   h' = tanh(x W + h U + b)
//
//   gru   blocks [z | r | n]
//         z  = sigmoid(x W_z + h U_z + b_z)
//         r  = sigmoid(x W_r + h U_r + b_r)
//         n  = tanh(x W_n + r * (h U_n) + b_n)
//         h' = (1 - z) * h + z * n
//
//   lstm  blocks [i | f | g | o]
//         i = sigmoid(.), f = sigmoid(.), g = tanh(.), o = sigmoid(.)
//         c' = f * c + i * g
//         h' = o * tanh(c')
//
// Initial states are zero vectors.

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "twr/autodiff.hpp"
#include "twr/rng.hpp"

namespace twr {

enum class CellFamily { Rnn, Gru, Lstm };

int gate_count(CellFamily family);
std::string_view to_string(CellFamily family);
CellFamily parse_cell_family(std::string_view name);

struct CellParams {
  CellFamily family = CellFamily::Lstm;
  Matrix input_weights;      // input_dim x gates*hidden
  Matrix recurrent_weights;  // hidden x gates*hidden
  Matrix bias;               // 1 x gates*hidden

  Eigen::Index input_dim() const { return input_weights.rows(); }
  Eigen::Index hidden_dim() const { return recurrent_weights.rows(); }

  /// Throws std::invalid_argument if shapes disagree with the gate count.
  void validate() const;
};

/// Weights uniform in [-scale, scale], zero biases, LSTM forget bias
/// `forget_bias`.
CellParams init_cell_params(CellFamily family, Eigen::Index input_dim,
                            Eigen::Index hidden_dim, Rng& rng,
                            double scale = 0.08, double forget_bias = 1.0);

/// CellParams registered on a tape.
struct CellVars {
  CellFamily family = CellFamily::Lstm;
  Eigen::Index hidden_dim = 0;
  Var input_weights;
  Var recurrent_weights;
  Var bias;
};

CellVars bind(Tape& tape, const CellParams& params);
CellVars bind(CellFamily family, Var input_weights, Var recurrent_weights,
              Var bias);

struct CellState {
  Var h;
  Var c;  // lstm only
};

CellState zero_state(Tape& tape, const CellVars& cell, Eigen::Index batch);

CellState cell_step(Tape& tape, const CellVars& cell, Var x,
                    const CellState& state);

struct HiddenStates {
  std::vector<Var> h;
  std::vector<Var> c;  // lstm only

  std::size_t length() const { return h.size(); }
};

/// Runs the cell over inputs[0..T). Throws on an empty sequence.
HiddenStates encode_sequence(Tape& tape, const CellVars& cell,
                             std::span<const Var> inputs,
                             std::optional<CellState> initial = std::nullopt);

/// Concatenation [h_forward(T) | h_backward(1)] of a forward pass and a pass
/// over the reversed inputs. Output is (batch x 2*hidden).
Var encode_bidirectional(Tape& tape, const CellVars& forward,
                         const CellVars& backward, std::span<const Var> inputs);

/// For each row b, picks states[lengths[b] - 1] (zeros when lengths[b] == 0).
/// Rows shorter than the batch maximum are read at their own final step.
Var select_final(Tape& tape, std::span<const Var> states,
                 std::span<const int> lengths);

}  // namespace twr
