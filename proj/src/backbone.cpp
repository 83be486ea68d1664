// SPDX-License-Identifier: Apache-2.0
#include "horgait/backbone.hpp"

#include <sstream>
#include <stdexcept>

namespace horgait {

std::vector<int> parse_order_schedule(const std::string& s) {
    std::vector<int> out;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        size_t pos = 0;
        int v;
        try {
            v = std::stoi(tok, &pos);
        } catch (const std::exception&) {
            throw std::invalid_argument("order schedule: cannot parse '" + tok + "'");
        }
        while (pos < tok.size() && std::isspace(static_cast<unsigned char>(tok[pos]))) ++pos;
        if (pos != tok.size()) throw std::invalid_argument("order schedule: cannot parse '" + tok + "'");
        if (v < 1) throw std::invalid_argument("order schedule: orders must be >= 1, got " + tok);
        out.push_back(v);
    }
    if (out.size() != 4)
        throw std::invalid_argument("order schedule: expected 4 comma-separated orders, got " +
                                    std::to_string(out.size()));
    return out;
}

const std::vector<std::vector<int>>& all_order_schedules() {
    static const std::vector<std::vector<int>> schedules = {
        {2, 2, 2, 2}, {3, 3, 3, 3}, {4, 4, 4, 4}, {5, 5, 5, 5},
        {1, 2, 3, 4}, {2, 3, 4, 5}, {1, 1, 3, 3}, {1, 1, 4, 4}, {2, 2, 4, 4},
    };
    return schedules;
}

namespace {

int64_t deep_cnn_params(int cin, int cout) {
    int64_t n = 0;
    n += static_cast<int64_t>(cout) * cin * 3 + cout;       // t1
    n += static_cast<int64_t>(cout) * cout * 9 + cout;      // s
    n += static_cast<int64_t>(cout) * cout * 3 + cout;      // t2
    if (cin != cout) n += static_cast<int64_t>(cout) * cin + cout;
    return n;
}

int64_t lhm_block_params(int c, int order) {
    auto sched = channel_schedule(c, order);
    int q_total = 0;
    for (int ck : sched) q_total += ck;
    int64_t n = 2 * c;                                        // norm1
    n += static_cast<int64_t>(2 * c) * c + 2 * c;             // phi_in
    n += static_cast<int64_t>(q_total) * 49;                  // dw
    for (int k = 1; k < order; ++k) n += deep_cnn_params(sched[k - 1], sched[k]);
    n += static_cast<int64_t>(c) * c + c;                     // phi_out
    n += 2 * c;                                               // ffn norm
    n += static_cast<int64_t>(4 * c) * c + 4 * c;             // lin1
    n += static_cast<int64_t>(c) * 4 * c + c;                 // lin2
    return n;
}

}  // namespace

std::string describe_model(const ModelConfig& cfg, const std::vector<int>& orders) {
    std::ostringstream os;
    int h = ModelConfig::kInputHeight, w = ModelConfig::kInputWidth;
    int64_t params = 0;

    os << "input: [T,3," << h << "," << w << "]\n";
    int c = cfg.stem_channels;
    params += static_cast<int64_t>(c) * 3 * 9 + c + 2 * c;
    os << "stem:  [T," << c << "," << h << "," << w << "]\n";
    for (int s = 0; s < 4; ++s) {
        int sc = cfg.stem_channels << s;
        int order = orders[static_cast<size_t>(s)];
        int depth = cfg.depths[static_cast<size_t>(s)];
        params += static_cast<int64_t>(depth) * lhm_block_params(sc, order);
        os << "stage" << s + 1 << " (order " << order << ", depth " << depth << "): [T," << sc << ","
           << h << "," << w << "]\n";
        if (s < 3) {
            params += static_cast<int64_t>(2 * sc) * sc * 4 + 2 * sc;
            h = (h + 1) / 2;
            w = (w + 1) / 2;
            os << "down" << s + 1 << ":  [T," << 2 * sc << "," << h << "," << w << "]\n";
        }
    }
    int top = cfg.stem_channels * 8;
    params += static_cast<int64_t>(cfg.embedding_dim) * top + cfg.embedding_dim;
    os << "pool:  [" << top << "]\n";
    os << "embed: [" << cfg.embedding_dim << "] (unit L2)\n";
    if (cfg.num_classes > 0) {
        params += static_cast<int64_t>(cfg.num_classes) * cfg.embedding_dim + cfg.num_classes;
        os << "logits: [" << cfg.num_classes << "]\n";
    }
    os << "parameters: " << params << "\n";
    return os.str();
}

}  // namespace horgait
