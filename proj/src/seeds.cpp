// SPDX-License-Identifier: Apache-2.0
//
// The five starting designs. Bodies are deliberately small causal blocks in
// the block DSL; the family names only signal which classic architecture each
// one gestures at. Every seed passes the full checker pipeline; roots are
// protected so mutation always targets an inner unit.

#include "evolab/oracle.hpp"

namespace evolab::oracle {

namespace {

tree::UnitNode unit(std::string name, std::string requirements, std::vector<std::string> inputs,
                    std::vector<std::string> outputs, std::string body,
                    std::vector<tree::UnitNode> children = {}, bool is_protected = false) {
  tree::UnitNode node;
  node.decl.name = std::move(name);
  node.decl.requirements = std::move(requirements);
  node.decl.inputs = std::move(inputs);
  node.decl.outputs = std::move(outputs);
  node.body = std::move(body);
  node.children = std::move(children);
  node.is_protected = is_protected;
  return node;
}

tree::UnitTree gpt_like() {
  auto attn_norm = unit("GptAttnNorm", "pre-mixer normalization", {"X"}, {"Y"}, "Y = norm(X)\n");
  auto mixer = unit("GptCausalMixer", "gated cumulative token mixer", {"X"}, {"Y"},
                    "param Wg dxd uniform(-0.3, 0.3)\n"
                    "param bg d zeros\n"
                    "param Wv dxd uniform(-0.3, 0.3)\n"
                    "L1 = linear(X, Wg)\n"
                    "B1 = bias(L1, bg)\n"
                    "G = sigmoid(B1)\n"
                    "V = linear(X, Wv)\n"
                    "GV = mul(G, V)\n"
                    "M = cumsum(GV)\n"
                    "Y = scale(M, 0.125)\n");
  auto mlp_norm = unit("GptMlpNorm", "pre-MLP normalization", {"X"}, {"Y"}, "Y = norm(X)\n");
  auto mlp = unit("GptGatedMlp", "gated two-layer MLP", {"X"}, {"Y"},
                  "param W1 dxd uniform(-0.3, 0.3)\n"
                  "param b1 d zeros\n"
                  "param W2 dxd uniform(-0.3, 0.3)\n"
                  "param Wo dxd uniform(-0.3, 0.3)\n"
                  "L1 = linear(X, W1)\n"
                  "B1 = bias(L1, b1)\n"
                  "H = relu(B1)\n"
                  "P = linear(H, W2)\n"
                  "L2 = linear(X, Wo)\n"
                  "G = sigmoid(L2)\n"
                  "Y = mul(G, P)\n");
  auto root = unit("GptBlock", "pre-norm residual block: mixer then MLP", {"X"}, {"Y"},
                   "N1 = call GptAttnNorm(X)\n"
                   "A = call GptCausalMixer(N1)\n"
                   "R = add(X, A)\n"
                   "N2 = call GptMlpNorm(R)\n"
                   "M = call GptGatedMlp(N2)\n"
                   "Y = add(R, M)\n",
                   {attn_norm, mixer, mlp_norm, mlp}, /*is_protected=*/true);
  return tree::UnitTree{"gpt_like", root};
}

tree::UnitTree mamba_like() {
  auto pre = unit("MambaPreNorm", "input normalization", {"X"}, {"Y"}, "Y = norm(X)\n");
  auto scan = unit("MambaSelectiveScan", "input-gated cumulative state scan", {"X"},
                   {"Y", "z_ssm_state"},
                   "param Wd dxd uniform(-0.3, 0.3)\n"
                   "param bd d zeros\n"
                   "param Wv dxd uniform(-0.3, 0.3)\n"
                   "L1 = linear(X, Wd)\n"
                   "B1 = bias(L1, bd)\n"
                   "Dg = sigmoid(B1)\n"
                   "V = linear(X, Wv)\n"
                   "DV = mul(Dg, V)\n"
                   "S = cumsum(DV)\n"
                   "Sc = scale(S, 0.125)\n"
                   "export z_ssm_state = Sc\n"
                   "Y = Sc\n");
  auto gate = unit("MambaOutGate", "sigmoid output gate over the scan state", {"X", "z_ssm_state"},
                   {"Y"},
                   "input z_ssm_state\n"
                   "param Wg dxd uniform(-0.3, 0.3)\n"
                   "L1 = linear(X, Wg)\n"
                   "G = sigmoid(L1)\n"
                   "Y = mul(G, z_ssm_state)\n");
  auto mix = unit("MambaChannelMix", "multiplicative channel mixer", {"X"}, {"Y"},
                  "param W1 dxd uniform(-0.3, 0.3)\n"
                  "param W2 dxd uniform(-0.3, 0.3)\n"
                  "L1 = linear(X, W1)\n"
                  "H = sigmoid(L1)\n"
                  "M1 = mul(H, X)\n"
                  "Y = linear(M1, W2)\n");
  auto root = unit("MambaBlock", "normalized scan, gate, then channel mix", {"X"}, {"Y"},
                   "N = call MambaPreNorm(X)\n"
                   "S = call MambaSelectiveScan(N)\n"
                   "G = call MambaOutGate(S)\n"
                   "R = add(X, G)\n"
                   "M = call MambaChannelMix(R)\n"
                   "Y = add(R, M)\n",
                   {pre, scan, gate, mix}, /*is_protected=*/true);
  return tree::UnitTree{"mamba_like", root};
}

tree::UnitTree retnet_like() {
  auto pre = unit("RetNorm", "input normalization", {"X"}, {"Y"}, "Y = norm(X)\n");
  auto retention = unit("RetRetention", "recency-weighted retention window", {"X"}, {"Y"},
                        "param Wv dxd uniform(-0.3, 0.3)\n"
                        "param Wq dxd uniform(-0.3, 0.3)\n"
                        "V = linear(X, Wv)\n"
                        "C = cumsum(V)\n"
                        "C1 = shift(C, 1)\n"
                        "S1 = scale(C1, -0.5)\n"
                        "W = add(C, S1)\n"
                        "L1 = linear(X, Wq)\n"
                        "Q = sigmoid(L1)\n"
                        "M = mul(Q, W)\n"
                        "Y = scale(M, 0.25)\n");
  auto ffn = unit("RetFfn", "tanh feed-forward", {"X"}, {"Y"},
                  "param W1 dxd uniform(-0.35, 0.35)\n"
                  "param b1 d zeros\n"
                  "param W2 dxd uniform(-0.35, 0.35)\n"
                  "L1 = linear(X, W1)\n"
                  "B1 = bias(L1, b1)\n"
                  "H = tanh(B1)\n"
                  "Y = linear(H, W2)\n");
  auto root = unit("RetBlock", "retention block with feed-forward", {"X"}, {"Y"},
                   "N = call RetNorm(X)\n"
                   "R = call RetRetention(N)\n"
                   "A = add(X, R)\n"
                   "F = call RetFfn(A)\n"
                   "Y = add(A, F)\n",
                   {pre, retention, ffn}, /*is_protected=*/true);
  return tree::UnitTree{"retnet_like", root};
}

tree::UnitTree rwkv_like() {
  auto norm_t = unit("RwkvNormT", "time-mix normalization", {"X"}, {"Y"}, "Y = norm(X)\n");
  auto wkv = unit("RwkvWkv", "key-weighted cumulative value store", {"X"}, {"Y"},
                  "param Wk dxd uniform(-0.3, 0.3)\n"
                  "param Wv dxd uniform(-0.3, 0.3)\n"
                  "L1 = linear(X, Wk)\n"
                  "K = sigmoid(L1)\n"
                  "V = linear(X, Wv)\n"
                  "KV = mul(K, V)\n"
                  "A = cumsum(KV)\n"
                  "Y = scale(A, 0.125)\n");
  auto time_mix = unit("RwkvTimeMix", "token-shift receptance over the wkv store", {"X"}, {"Y"},
                       "param mu_t scalar uniform(0.4, 0.6)\n"
                       "param Wr dxd uniform(-0.3, 0.3)\n"
                       "P = shift(X, 1)\n"
                       "S1 = scale(P, -1)\n"
                       "Dx = add(X, S1)\n"
                       "S2 = scale(Dx, mu_t)\n"
                       "TM = add(P, S2)\n"
                       "L1 = linear(TM, Wr)\n"
                       "R = sigmoid(L1)\n"
                       "K = call RwkvWkv(TM)\n"
                       "Y = mul(R, K)\n",
                       {wkv});
  auto norm_c = unit("RwkvNormC", "channel-mix normalization", {"X"}, {"Y"}, "Y = norm(X)\n");
  auto channel_mix = unit("RwkvChannelMix", "squared-relu channel mixer", {"X"}, {"Y"},
                          "param Wk dxd uniform(-0.35, 0.35)\n"
                          "param Wv dxd uniform(-0.35, 0.35)\n"
                          "param Wr dxd uniform(-0.3, 0.3)\n"
                          "L1 = linear(X, Wk)\n"
                          "K = relu(L1)\n"
                          "KK = mul(K, K)\n"
                          "V = linear(KK, Wv)\n"
                          "L2 = linear(X, Wr)\n"
                          "R = sigmoid(L2)\n"
                          "Y = mul(R, V)\n");
  auto root = unit("RwkvBlock", "time mix then channel mix, both residual", {"X"}, {"Y"},
                   "N1 = call RwkvNormT(X)\n"
                   "T = call RwkvTimeMix(N1)\n"
                   "A = add(X, T)\n"
                   "N2 = call RwkvNormC(A)\n"
                   "C = call RwkvChannelMix(N2)\n"
                   "Y = add(A, C)\n",
                   {norm_t, time_mix, norm_c, channel_mix}, /*is_protected=*/true);
  return tree::UnitTree{"rwkv_like", root};
}

tree::UnitTree ttt_like() {
  auto pre = unit("TttNorm", "input normalization", {"X"}, {"Y"}, "Y = norm(X)\n");
  auto fast = unit("TttFastState", "cumulative fast-weight state", {"X"}, {"Y", "z_fast_state"},
                   "param Wh dxd uniform(-0.3, 0.3)\n"
                   "param Wu dxd uniform(-0.3, 0.3)\n"
                   "L1 = linear(X, Wh)\n"
                   "H = tanh(L1)\n"
                   "U = linear(X, Wu)\n"
                   "HU = mul(H, U)\n"
                   "S = cumsum(HU)\n"
                   "Sc = scale(S, 0.125)\n"
                   "export z_fast_state = Sc\n"
                   "Y = Sc\n");
  auto readout = unit("TttReadout", "state-modulated readout", {"X", "z_fast_state"}, {"Y"},
                      "input z_fast_state\n"
                      "param Wo dxd uniform(-0.3, 0.3)\n"
                      "param go scalar uniform(0.3, 0.7)\n"
                      "O = linear(X, Wo)\n"
                      "G = tanh(z_fast_state)\n"
                      "M = mul(O, G)\n"
                      "Y = scale(M, go)\n");
  auto mlp = unit("TttMlp", "relu feed-forward", {"X"}, {"Y"},
                  "param W1 dxd uniform(-0.3, 0.3)\n"
                  "param b1 d zeros\n"
                  "param W2 dxd uniform(-0.3, 0.3)\n"
                  "L1 = linear(X, W1)\n"
                  "B1 = bias(L1, b1)\n"
                  "H = relu(B1)\n"
                  "Y = linear(H, W2)\n");
  auto root = unit("TttBlock", "fast-state update with gated readout", {"X"}, {"Y"},
                   "N = call TttNorm(X)\n"
                   "F = call TttFastState(N)\n"
                   "O = call TttReadout(N)\n"
                   "R = add(X, O)\n"
                   "M = call TttMlp(R)\n"
                   "Y = add(R, M)\n",
                   {pre, fast, readout, mlp}, /*is_protected=*/true);
  return tree::UnitTree{"ttt_like", root};
}

}  // namespace

std::vector<tree::UnitTree> build_seed_trees() {
  return {gpt_like(), mamba_like(), retnet_like(), rwkv_like(), ttt_like()};
}

}  // namespace evolab::oracle
