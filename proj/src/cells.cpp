#include "twr/cells.hpp"

#include <stdexcept>

namespace twr {

int gate_count(CellFamily family) {
  switch (family) {
    case CellFamily::Rnn: return 1;
    case CellFamily::Gru: return 3;
    case CellFamily::Lstm: return 4;
  }
  return 0;
}

std::string_view to_string(CellFamily family) {
  switch (family) {
    case CellFamily::Rnn: return "rnn";
    case CellFamily::Gru: return "gru";
    case CellFamily::Lstm: return "lstm";
  }
  return "?";
}

CellFamily parse_cell_family(std::string_view name) {
  if (name == "rnn") return CellFamily::Rnn;
  if (name == "gru") return CellFamily::Gru;
  if (name == "lstm") return CellFamily::Lstm;
  throw std::invalid_argument("unknown cell family '" + std::string(name) +
                              "' (expected rnn, gru or lstm)");
}

void CellParams::validate() const {
  const Eigen::Index width = gate_count(family) * hidden_dim();
  if (hidden_dim() <= 0 || input_dim() <= 0) {
    throw std::invalid_argument("cell: dimensions must be positive");
  }
  if (input_weights.cols() != width || recurrent_weights.cols() != width ||
      bias.rows() != 1 || bias.cols() != width) {
    throw std::invalid_argument(
        "cell: " + std::string(to_string(family)) + " expects gate width " +
        std::to_string(width) + ", got W " + std::to_string(input_weights.cols()) +
        ", U " + std::to_string(recurrent_weights.cols()) + ", b " +
        std::to_string(bias.rows()) + "x" + std::to_string(bias.cols()));
  }
}

CellParams init_cell_params(CellFamily family, Eigen::Index input_dim,
                            Eigen::Index hidden_dim, Rng& rng, double scale,
                            double forget_bias) {
  if (input_dim <= 0 || hidden_dim <= 0) {
    throw std::invalid_argument("cell: dimensions must be positive");
  }
  const Eigen::Index width = gate_count(family) * hidden_dim;
  CellParams p;
  p.family = family;
  p.input_weights = rng.uniform_matrix(input_dim, width, -scale, scale);
  p.recurrent_weights = rng.uniform_matrix(hidden_dim, width, -scale, scale);
  p.bias = Matrix::Zero(1, width);
  if (family == CellFamily::Lstm) {
    p.bias.middleCols(hidden_dim, hidden_dim).setConstant(forget_bias);
  }
  return p;
}

CellVars bind(Tape& tape, const CellParams& params) {
  params.validate();
  return bind(params.family, tape.leaf(params.input_weights),
              tape.leaf(params.recurrent_weights), tape.leaf(params.bias));
}

CellVars bind(CellFamily family, Var input_weights, Var recurrent_weights,
              Var bias) {
  CellVars v;
  v.family = family;
  v.hidden_dim = input_weights.tape->rows(recurrent_weights);
  v.input_weights = input_weights;
  v.recurrent_weights = recurrent_weights;
  v.bias = bias;
  return v;
}

CellState zero_state(Tape& tape, const CellVars& cell, Eigen::Index batch) {
  CellState s;
  s.h = tape.constant(Matrix::Zero(batch, cell.hidden_dim));
  if (cell.family == CellFamily::Lstm) {
    s.c = tape.constant(Matrix::Zero(batch, cell.hidden_dim));
  }
  return s;
}

CellState cell_step(Tape& tape, const CellVars& cell, Var x,
                    const CellState& state) {
  const Eigen::Index H = cell.hidden_dim;
  if (tape.cols(x) != tape.rows(cell.input_weights)) {
    throw std::invalid_argument(
        "cell_step: input has " + std::to_string(tape.cols(x)) +
        " columns, cell expects " + std::to_string(tape.rows(cell.input_weights)));
  }
  if (tape.cols(state.h) != H || tape.rows(state.h) != tape.rows(x)) {
    throw std::invalid_argument("cell_step: state shape does not match input batch "
                                "or hidden size");
  }

  const Var xw = tape.add_row(tape.matmul(x, cell.input_weights), cell.bias);
  const Var hu = tape.matmul(state.h, cell.recurrent_weights);

  CellState next;
  switch (cell.family) {
    case CellFamily::Rnn:
      next.h = tape.tanh(tape.add(xw, hu));
      break;
    case CellFamily::Gru: {
      const Var zr = tape.sigmoid(
          tape.add(tape.slice_cols(xw, 0, 2 * H), tape.slice_cols(hu, 0, 2 * H)));
      const Var z = tape.slice_cols(zr, 0, H);
      const Var r = tape.slice_cols(zr, H, H);
      const Var n = tape.tanh(tape.add(tape.slice_cols(xw, 2 * H, H),
                                       tape.mul(r, tape.slice_cols(hu, 2 * H, H))));
      // (1 - z) * h + z * n  ==  h + z * (n - h)
      next.h = tape.add(state.h, tape.mul(z, tape.sub(n, state.h)));
      break;
    }
    case CellFamily::Lstm: {
      if (!state.c.valid()) {
        throw std::invalid_argument("cell_step: lstm requires a cell state");
      }
      const Var pre = tape.add(xw, hu);
      const Var ifo_i = tape.sigmoid(tape.slice_cols(pre, 0, 2 * H));
      const Var i = tape.slice_cols(ifo_i, 0, H);
      const Var f = tape.slice_cols(ifo_i, H, H);
      const Var g = tape.tanh(tape.slice_cols(pre, 2 * H, H));
      const Var o = tape.sigmoid(tape.slice_cols(pre, 3 * H, H));
      next.c = tape.add(tape.mul(f, state.c), tape.mul(i, g));
      next.h = tape.mul(o, tape.tanh(next.c));
      break;
    }
  }
  return next;
}

HiddenStates encode_sequence(Tape& tape, const CellVars& cell,
                             std::span<const Var> inputs,
                             std::optional<CellState> initial) {
  if (inputs.empty()) {
    throw std::invalid_argument("encode_sequence: empty sequence");
  }
  CellState state =
      initial ? *initial : zero_state(tape, cell, tape.rows(inputs.front()));
  HiddenStates out;
  out.h.reserve(inputs.size());
  for (Var x : inputs) {
    state = cell_step(tape, cell, x, state);
    out.h.push_back(state.h);
    if (cell.family == CellFamily::Lstm) out.c.push_back(state.c);
  }
  return out;
}

Var encode_bidirectional(Tape& tape, const CellVars& forward,
                         const CellVars& backward, std::span<const Var> inputs) {
  if (forward.family != backward.family) {
    throw std::invalid_argument("encode_bidirectional: direction families differ (" +
                                std::string(to_string(forward.family)) + " vs " +
                                std::string(to_string(backward.family)) + ")");
  }
  if (forward.hidden_dim != backward.hidden_dim) {
    throw std::invalid_argument("encode_bidirectional: hidden sizes differ");
  }
  if (inputs.empty()) {
    throw std::invalid_argument("encode_bidirectional: empty sequence");
  }
  const HiddenStates fwd = encode_sequence(tape, forward, inputs);
  std::vector<Var> reversed(inputs.rbegin(), inputs.rend());
  const HiddenStates bwd = encode_sequence(tape, backward, reversed);
  return tape.concat_cols(fwd.h.back(), bwd.h.back());
}

Var select_final(Tape& tape, std::span<const Var> states,
                 std::span<const int> lengths) {
  if (states.empty()) throw std::invalid_argument("select_final: no states");
  const Eigen::Index batch = tape.rows(states.front());
  if (static_cast<Eigen::Index>(lengths.size()) != batch) {
    throw std::invalid_argument("select_final: lengths do not match batch");
  }
  Var out;
  for (std::size_t t = 0; t < states.size(); ++t) {
    Matrix pick = Matrix::Zero(batch, 1);
    bool any = false;
    for (Eigen::Index b = 0; b < batch; ++b) {
      if (lengths[static_cast<std::size_t>(b)] == static_cast<int>(t) + 1) {
        pick(b, 0) = 1.0;
        any = true;
      }
    }
    if (!any) continue;
    const Var term = tape.mul_col(states[t], tape.constant(std::move(pick)));
    out = out.valid() ? tape.add(out, term) : term;
  }
  if (!out.valid()) {
    out = tape.constant(Matrix::Zero(batch, tape.cols(states.front())));
  }
  return out;
}

}  // namespace twr
