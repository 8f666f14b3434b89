#pragma once

#include <string>

#include "reasoning.hpp"

namespace dmrm {

// Fixed-order JSON: {"channels":{"track":[{"kind","weights"},...],
// "locate":[...]},"decoder":[{"step","alpha_q","alpha_u","alpha_v"},...]}.
std::string trace_to_json(const ReasoningTrace& trace);
void write_trace_json(const ReasoningTrace& trace, const std::string& path);
ReasoningTrace trace_from_json(const std::string& text);

// Static plots: <prefix>_track.svg and <prefix>_locate.svg hold one bar chart
// per hop; <prefix>_decoder.svg holds three per-step attention heatmaps.
// Returns the paths written.
std::vector<std::string> write_trace_plots(const ReasoningTrace& trace,
                                           const std::string& prefix);

}  // namespace dmrm
