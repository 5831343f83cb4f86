#include "chdrt/config.hpp"

#include <fstream>

#include "chdrt/errors.hpp"

namespace chdrt {

namespace {

std::string trim(const std::string& s)
{
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string::npos)
        return "";
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

uint64_t to_u64(const std::string& key, const std::string& value)
{
    size_t used = 0;
    uint64_t v = 0;
    try {
        v = std::stoull(value, &used, 0);
    } catch (const std::exception&) {
        throw ConfigError("bad integer for " + key + ": '" + value + "'");
    }
    if (used != value.size())
        throw ConfigError("bad integer for " + key + ": '" + value + "'");
    return v;
}

double to_double(const std::string& key, const std::string& value)
{
    size_t used = 0;
    double v = 0;
    try {
        v = std::stod(value, &used);
    } catch (const std::exception&) {
        throw ConfigError("bad number for " + key + ": '" + value + "'");
    }
    if (used != value.size())
        throw ConfigError("bad number for " + key + ": '" + value + "'");
    return v;
}

} // namespace

std::map<std::string, std::string> parse_kv_file(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw ConfigError("cannot open config file: " + path);

    std::map<std::string, std::string> kv;
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        lineno++;
        const auto hash = line.find('#');
        if (hash != std::string::npos)
            line.erase(hash);
        line = trim(line);
        if (line.empty())
            continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError(path + ":" + std::to_string(lineno) +
                              ": expected key = value");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty())
            throw ConfigError(path + ":" + std::to_string(lineno) + ": empty key");
        if (!kv.emplace(key, value).second)
            throw ConfigError(path + ":" + std::to_string(lineno) + ": duplicate key '" +
                              key + "'");
    }
    return kv;
}

void apply_setting(ScenarioConfig& cfg, const std::string& key, const std::string& value)
{
    if (key == "mode") {
        if (value == "pass_through")
            cfg.mode = Mode::PassThrough;
        else if (value == "lti_emulation")
            cfg.mode = Mode::LtiEmulation;
        else
            throw ConfigError("mode must be pass_through or lti_emulation, got '" + value +
                              "'");
    } else if (key == "sample_rate") {
        cfg.sample_rate = to_double(key, value);
    } else if (key == "spp") {
        cfg.spp = to_u64(key, value);
    } else if (key == "ports") {
        cfg.n_ports = to_u64(key, value);
    } else if (key == "cir_taps") {
        cfg.cir_taps = to_u64(key, value);
    } else if (key == "cir_file") {
        cfg.cir_file = value;
    } else if (key == "seed") {
        cfg.seed = to_u64(key, value);
    } else if (key == "transport_latency") {
        cfg.transport_latency = to_u64(key, value);
    } else if (key == "transport_jitter") {
        cfg.transport_jitter = to_u64(key, value);
    } else if (key == "processing") {
        cfg.processing_ticks = to_u64(key, value);
    } else if (key == "lead_margin") {
        cfg.lead_margin = to_u64(key, value);
    } else if (key == "adc_delay") {
        cfg.adc_delay = to_u64(key, value);
    } else if (key == "dac_delay") {
        cfg.dac_delay = to_u64(key, value);
    } else if (key == "capacity_bytes") {
        cfg.capacity_bytes = to_u64(key, value);
    } else if (key == "status_cadence") {
        cfg.status_cadence = static_cast<uint32_t>(to_u64(key, value));
    } else if (key == "sounding_periods") {
        cfg.sounding_periods = to_u64(key, value);
    } else if (key == "payload_blocks") {
        cfg.payload_blocks = to_u64(key, value);
    } else if (key == "late_block") {
        cfg.late_block = to_u64(key, value);
    } else if (key == "late_delay") {
        cfg.late_delay_ticks = to_u64(key, value);
    } else if (key == "bin_width_us") {
        cfg.bin_width_us = to_double(key, value);
    } else if (key == "capture_file") {
        cfg.capture_file = value;
    } else {
        throw ConfigError("unknown config key '" + key + "'");
    }
}

void apply_settings(ScenarioConfig& cfg, const std::map<std::string, std::string>& kv)
{
    for (const auto& [key, value] : kv)
        apply_setting(cfg, key, value);
}

} // namespace chdrt
