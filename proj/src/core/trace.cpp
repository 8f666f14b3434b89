#include "trace.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "error.hpp"

namespace dmrm {

using ordered_json = nlohmann::ordered_json;

namespace {

ordered_json channel_json(const std::vector<TraceStep>& steps) {
    ordered_json arr = ordered_json::array();
    for (const TraceStep& s : steps) {
        ordered_json j;
        j["kind"] = std::string(1, s.kind);
        j["weights"] = s.weights;
        arr.push_back(std::move(j));
    }
    return arr;
}

std::vector<TraceStep> channel_from_json(const ordered_json& arr) {
    std::vector<TraceStep> out;
    for (const auto& j : arr) {
        TraceStep s;
        const std::string kind = j.at("kind").get<std::string>();
        require(kind == "T" || kind == "L", "unknown trace step kind: " + kind);
        s.kind = kind[0];
        s.weights = j.at("weights").get<std::vector<double>>();
        out.push_back(std::move(s));
    }
    return out;
}

}  // namespace

std::string trace_to_json(const ReasoningTrace& trace) {
    ordered_json j;
    j["channels"]["track"] = channel_json(trace.track);
    j["channels"]["locate"] = channel_json(trace.locate);
    ordered_json dec = ordered_json::array();
    for (const DecoderTraceStep& s : trace.decoder) {
        ordered_json d;
        d["step"] = s.step;
        d["alpha_q"] = s.alpha_q;
        d["alpha_u"] = s.alpha_u;
        d["alpha_v"] = s.alpha_v;
        dec.push_back(std::move(d));
    }
    j["decoder"] = std::move(dec);
    return j.dump(2);
}

void write_trace_json(const ReasoningTrace& trace, const std::string& path) {
    std::ofstream os(path, std::ios::trunc);
    require(os.good(), "cannot open trace file: " + path);
    os << trace_to_json(trace) << "\n";
    require(os.good(), "failed writing trace file: " + path);
}

ReasoningTrace trace_from_json(const std::string& text) {
    const ordered_json j = ordered_json::parse(text);
    ReasoningTrace t;
    t.track = channel_from_json(j.at("channels").at("track"));
    t.locate = channel_from_json(j.at("channels").at("locate"));
    for (const auto& d : j.at("decoder")) {
        DecoderTraceStep s;
        s.step = d.at("step").get<int>();
        s.alpha_q = d.at("alpha_q").get<std::vector<double>>();
        s.alpha_u = d.at("alpha_u").get<std::vector<double>>();
        s.alpha_v = d.at("alpha_v").get<std::vector<double>>();
        t.decoder.push_back(std::move(s));
    }
    return t;
}

namespace {

constexpr int kBarWidth = 26;
constexpr int kBarGap = 6;
constexpr int kChartHeight = 90;
constexpr int kChartPad = 28;

void svg_bar_chart(std::ostream& os, const std::vector<TraceStep>& steps,
                   const std::string& title) {
    int max_n = 1;
    for (const TraceStep& s : steps)
        max_n = std::max(max_n, static_cast<int>(s.weights.size()));
    const int chart_w = kChartPad + max_n * (kBarWidth + kBarGap);
    const int total_h = static_cast<int>(steps.size()) * (kChartHeight + 2 * kChartPad);
    const int total_w = chart_w + kChartPad;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << total_w << "\" height=\""
       << std::max(total_h, kChartHeight) << "\" font-family=\"monospace\" font-size=\"11\">\n";
    int y0 = kChartPad;
    for (std::size_t hop = 0; hop < steps.size(); ++hop) {
        const TraceStep& s = steps[hop];
        os << "<text x=\"" << kChartPad << "\" y=\"" << (y0 - 8) << "\">" << title << " hop "
           << hop + 1 << " (" << s.kind << ")</text>\n";
        for (std::size_t i = 0; i < s.weights.size(); ++i) {
            const double w = std::clamp(s.weights[i], 0.0, 1.0);
            const int h = static_cast<int>(w * kChartHeight + 0.5);
            const int x = kChartPad + static_cast<int>(i) * (kBarWidth + kBarGap);
            os << "<rect x=\"" << x << "\" y=\"" << y0 + kChartHeight - h << "\" width=\""
               << kBarWidth << "\" height=\"" << h << "\" fill=\""
               << (s.kind == 'T' ? "#4878cf" : "#d65f5f") << "\"/>\n";
            os << "<text x=\"" << x + 4 << "\" y=\"" << y0 + kChartHeight + 14 << "\">" << i
               << "</text>\n";
        }
        y0 += kChartHeight + 2 * kChartPad;
    }
    os << "</svg>\n";
}

void svg_heatmap(std::ostream& os, const ReasoningTrace& trace) {
    constexpr int kCell = 22;
    const struct {
        const char* name;
        std::vector<double> DecoderTraceStep::* field;
    } blocks[] = {{"alpha_q", &DecoderTraceStep::alpha_q},
                  {"alpha_u", &DecoderTraceStep::alpha_u},
                  {"alpha_v", &DecoderTraceStep::alpha_v}};
    int max_cols = 1;
    for (const DecoderTraceStep& s : trace.decoder)
        for (const auto& b : blocks)
            max_cols = std::max(max_cols, static_cast<int>((s.*(b.field)).size()));
    const int rows = static_cast<int>(trace.decoder.size());
    const int block_h = rows * kCell + 2 * kChartPad;
    const int width = kChartPad * 2 + max_cols * kCell + 60;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
       << 3 * block_h << "\" font-family=\"monospace\" font-size=\"11\">\n";
    int y0 = kChartPad;
    for (const auto& b : blocks) {
        os << "<text x=\"" << kChartPad << "\" y=\"" << y0 - 8 << "\">decoder " << b.name
           << " (rows = steps)</text>\n";
        for (int r = 0; r < rows; ++r) {
            const std::vector<double>& w = trace.decoder[r].*(b.field);
            for (std::size_t c = 0; c < w.size(); ++c) {
                const int shade = 255 - static_cast<int>(std::clamp(w[c], 0.0, 1.0) * 255.0);
                os << "<rect x=\"" << kChartPad + static_cast<int>(c) * kCell << "\" y=\""
                   << y0 + r * kCell << "\" width=\"" << kCell - 2 << "\" height=\"" << kCell - 2
                   << "\" fill=\"rgb(" << shade << "," << shade << ",255)\"/>\n";
            }
        }
        y0 += block_h;
    }
    os << "</svg>\n";
}

void write_file(const std::string& path, const std::string& body) {
    std::ofstream os(path, std::ios::trunc);
    require(os.good(), "cannot open plot file: " + path);
    os << body;
    require(os.good(), "failed writing plot file: " + path);
}

}  // namespace

std::vector<std::string> write_trace_plots(const ReasoningTrace& trace,
                                           const std::string& prefix) {
    std::vector<std::string> written;
    {
        std::ostringstream os;
        svg_bar_chart(os, trace.track, "track channel");
        written.push_back(prefix + "_track.svg");
        write_file(written.back(), os.str());
    }
    {
        std::ostringstream os;
        svg_bar_chart(os, trace.locate, "locate channel");
        written.push_back(prefix + "_locate.svg");
        write_file(written.back(), os.str());
    }
    if (!trace.decoder.empty()) {
        std::ostringstream os;
        svg_heatmap(os, trace);
        written.push_back(prefix + "_decoder.svg");
        write_file(written.back(), os.str());
    }
    return written;
}

}  // namespace dmrm
