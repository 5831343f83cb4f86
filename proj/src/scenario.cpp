#include "chdrt/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include "chdrt/errors.hpp"
#include "chdrt/fft.hpp"

namespace chdrt {

const char* mode_name(Mode m)
{
    switch (m) {
    case Mode::PassThrough: return "pass_through";
    case Mode::LtiEmulation: return "lti_emulation";
    }
    return "?";
}

void ScenarioConfig::validate() const
{
    if (!(sample_rate > 0))
        throw ConfigError("sample_rate must be positive");
    if (spp < 4 || spp % 2 != 0)
        throw ConfigError("spp must be even and at least 4");
    if (n_ports < 1 || n_ports > 32)
        throw ConfigError("n_ports must be in [1, 32]");
    if (cir_taps < 1)
        throw ConfigError("cir_taps must be at least 1");
    if (transport_latency < 1)
        throw ConfigError("transport_latency must be at least 1 tick");
    if (lead_margin < 1)
        throw ConfigError("lead_margin must be at least 1 tick");
    if (2 * transport_jitter > lead_margin)
        throw ConfigError("transport_jitter above lead_margin/2 would make packets late");
    if (status_cadence < 1)
        throw ConfigError("status_cadence must be at least 1");
    if (sounding_periods < 1)
        throw ConfigError("sounding_periods must be at least 1");
    const uint64_t pkt_bytes = 16 + 4 * static_cast<uint64_t>(spp);
    if (capacity_bytes < pkt_bytes)
        throw ConfigError("capacity_bytes below one packet");
    if (!(bin_width_us > 0))
        throw ConfigError("bin_width_us must be positive");
    if (late_delay_ticks > 0 && !late_block)
        throw ConfigError("late_delay set without late_block to apply it to");
}

LatencyModel ScenarioConfig::model() const
{
    LatencyModel m;
    m.packetization = spp;
    m.adc_delay = adc_delay;
    m.transport_rx = transport_latency;
    m.processing = processing_ticks;
    m.transport_tx = transport_latency;
    m.lead_margin = lead_margin;
    m.dac_delay = dac_delay;
    return m;
}

// ---------------------------------------------------------------------------
// Excitation
// ---------------------------------------------------------------------------

std::vector<Cf32> zadoff_chu(size_t n)
{
    if (n < 2 || n % 2 != 0)
        throw ConfigError("Zadoff-Chu length must be even and at least 2");
    std::vector<Cf32> x(n);
    for (size_t k = 0; k < n; k++) {
        // exp(-i pi k^2 / n); reduce k^2 mod 2n to keep the phase argument small
        const uint64_t m = (static_cast<uint64_t>(k) * k) % (2 * n);
        const double phase = -M_PI * static_cast<double>(m) / static_cast<double>(n);
        x[k] = Cf32(static_cast<float>(std::cos(phase)), static_cast<float>(std::sin(phase)));
    }
    return x;
}

ExcitationLayout plan_excitation(const ScenarioConfig& cfg)
{
    const size_t spp = cfg.spp;
    const auto align = [spp](size_t v) { return (v + spp - 1) / spp * spp; };

    ExcitationLayout lay;
    lay.preamble_len = align(std::max<size_t>(2 * spp, 1024));
    lay.guard = align(cfg.cir_taps) + spp;
    lay.zc_period = align(std::max(4 * cfg.cir_taps, 2 * spp));
    lay.zc_settle = 1;
    lay.zc_measure = cfg.sounding_periods;

    lay.preamble_offset.resize(cfg.n_ports);
    lay.sounding_offset.resize(cfg.n_ports);
    for (size_t i = 0; i < cfg.n_ports; i++)
        lay.preamble_offset[i] = i * lay.preamble_len;

    size_t pos = cfg.n_ports * lay.preamble_len + lay.guard;
    const size_t span = (lay.zc_settle + lay.zc_measure) * lay.zc_period + lay.guard;
    for (size_t i = 0; i < cfg.n_ports; i++)
        lay.sounding_offset[i] = pos + i * span;
    pos += cfg.n_ports * span;

    lay.payload_offset = pos;
    lay.payload_len = cfg.payload_blocks * spp;
    pos += lay.payload_len;

    lay.total_len = pos + lay.guard;
    return lay;
}

std::vector<std::vector<Cf32>> build_excitation(const ExcitationLayout& layout,
                                                size_t n_ports, Rng& rng)
{
    std::vector<std::vector<Cf32>> x(n_ports, std::vector<Cf32>(layout.total_len, Cf32(0)));
    for (size_t i = 0; i < n_ports; i++)
        for (size_t k = 0; k < layout.preamble_len; k++)
            x[i][layout.preamble_offset[i] + k] = rng.next_qpsk();

    const std::vector<Cf32> zc = zadoff_chu(layout.zc_period);
    const size_t reps = layout.zc_settle + layout.zc_measure;
    for (size_t i = 0; i < n_ports; i++)
        for (size_t p = 0; p < reps; p++)
            std::copy(zc.begin(), zc.end(),
                      x[i].begin() + static_cast<ptrdiff_t>(layout.sounding_offset[i] +
                                                            p * layout.zc_period));

    for (size_t i = 0; i < n_ports; i++)
        for (size_t k = 0; k < layout.payload_len; k++)
            x[i][layout.payload_offset + k] = rng.next_qpsk();
    return x;
}

CirMatrix make_random_cir(Rng& rng, size_t n_out, size_t n_in, size_t taps)
{
    CirMatrix m(n_out, std::vector<std::vector<Cf32>>(n_in));
    for (size_t j = 0; j < n_out; j++) {
        for (size_t i = 0; i < n_in; i++) {
            m[j][i].resize(taps);
            for (size_t k = 0; k < taps; k++) {
                const double decay = std::exp(-2.0 * static_cast<double>(k) /
                                              static_cast<double>(taps));
                const std::complex<double> g = rng.next_cgauss() * decay;
                m[j][i][k] = Cf32(static_cast<float>(g.real()),
                                  static_cast<float>(g.imag()));
            }
        }
    }
    return m;
}

void scale_cir_to_peak(CirMatrix& cirs, const std::vector<std::vector<Cf32>>& excitations,
                       float target_peak)
{
    if (cirs.empty() || cirs.front().empty())
        throw PortCountMismatch("empty CIR matrix");
    const size_t n_out = cirs.size();
    const size_t n_in = cirs.front().size();
    if (excitations.size() != n_in)
        throw PortCountMismatch("one excitation per input port required");

    size_t taps = 1, sig_len = 0;
    for (const auto& row : cirs)
        for (const auto& h : row)
            taps = std::max(taps, h.size());
    for (const auto& x : excitations)
        sig_len = std::max(sig_len, x.size());

    size_t n = 1;
    while (n < sig_len + taps)
        n <<= 1;

    Fft<double> fft(n);
    std::vector<std::vector<std::complex<double>>> fx(n_in);
    std::vector<std::complex<double>> buf(n), spec(n), acc(n);
    for (size_t i = 0; i < n_in; i++) {
        std::fill(buf.begin(), buf.end(), std::complex<double>(0));
        for (size_t k = 0; k < excitations[i].size(); k++)
            buf[k] = excitations[i][k];
        fx[i].resize(n);
        fft.forward(buf, fx[i]);
    }

    double peak = 0;
    for (size_t j = 0; j < n_out; j++) {
        std::fill(acc.begin(), acc.end(), std::complex<double>(0));
        for (size_t i = 0; i < n_in; i++) {
            std::fill(buf.begin(), buf.end(), std::complex<double>(0));
            for (size_t k = 0; k < cirs[j][i].size(); k++)
                buf[k] = cirs[j][i][k];
            fft.forward(buf, spec);
            for (size_t k = 0; k < n; k++)
                acc[k] += spec[k] * fx[i][k];
        }
        fft.inverse(acc, buf);
        for (const auto& v : buf)
            peak = std::max({ peak, std::abs(v.real()), std::abs(v.imag()) });
    }
    if (peak <= 0)
        return;

    const float g = static_cast<float>(target_peak / peak);
    for (auto& row : cirs)
        for (auto& h : row)
            for (auto& tap : h)
                tap *= g;
}

// ---------------------------------------------------------------------------
// Report formatting
// ---------------------------------------------------------------------------

namespace {

struct CsvBuilder {
    std::string s = "metric,value,unit\n";

    void row(const std::string& metric, const std::string& value, const char* unit)
    {
        s += metric;
        s += ',';
        s += value;
        s += ',';
        s += unit;
        s += '\n';
    }
    void num(const std::string& metric, double v, const char* unit)
    {
        if (std::isnan(v)) {
            row(metric, "none", unit);
            return;
        }
        char b[48];
        std::snprintf(b, sizeof(b), "%.6f", v);
        row(metric, b, unit);
    }
    void count(const std::string& metric, uint64_t v, const char* unit)
    {
        char b[32];
        std::snprintf(b, sizeof(b), "%llu", static_cast<unsigned long long>(v));
        row(metric, b, unit);
    }
};

std::string pair_metric(const char* base, size_t j, size_t i, const char* suffix = "")
{
    char b[64];
    std::snprintf(b, sizeof(b), "%s_out%zu_in%zu%s", base, j, i, suffix);
    return b;
}

} // namespace

std::string report_csv(const ScenarioReport& r)
{
    CsvBuilder csv;
    csv.row("mode", mode_name(r.mode), "-");
    csv.num("sample_rate", r.sample_rate / 1e6, "MS/s");
    csv.count("spp", r.spp, "samples");
    csv.count("ports", r.n_ports, "-");

    const double tick_us = 1e6 / r.sample_rate;
    csv.num("packetization", static_cast<double>(r.model.packetization) * tick_us, "us");
    csv.num("adc_delay", static_cast<double>(r.model.adc_delay) * tick_us, "us");
    csv.num("transport_rx", static_cast<double>(r.model.transport_rx) * tick_us, "us");
    csv.num("processing", static_cast<double>(r.model.processing) * tick_us, "us");
    csv.num("transport_tx", static_cast<double>(r.model.transport_tx) * tick_us, "us");
    csv.num("lead_margin", static_cast<double>(r.model.lead_margin) * tick_us, "us");
    csv.num("dac_delay", static_cast<double>(r.model.dac_delay) * tick_us, "us");
    csv.num("predicted_a2a", r.predicted_a2a_us, "us");
    csv.num("rtt", r.rtt_us, "us");

    for (size_t j = 0; j < r.a2a.size(); j++) {
        for (size_t i = 0; i < r.a2a[j].size(); i++) {
            if (r.a2a[j][i]) {
                csv.num(pair_metric("a2a", j, i), r.a2a[j][i]->delay_us, "us");
                csv.num(pair_metric("a2a", j, i, "_corr"), r.a2a[j][i]->peak_corr, "-");
            } else {
                csv.row(pair_metric("a2a", j, i), "none", "us");
                csv.row(pair_metric("a2a", j, i, "_corr"), "none", "-");
            }
        }
    }
    csv.num("a2a_model_dev", r.a2a_model_dev_ticks, "ticks");
    csv.count("rx_cadence", r.rx_cadence_ticks, "ticks");

    for (size_t j = 0; j < r.est_err_db.size(); j++)
        for (size_t i = 0; i < r.est_err_db[j].size(); i++)
            csv.num(pair_metric("est_err", j, i), r.est_err_db[j][i], "dB");
    csv.num("worst_est_err", r.worst_est_err_db, "dB");

    csv.num("latency_bin_width", r.host_latency.bin_width_us, "us");
    csv.count("latency_samples", r.host_latency.total, "-");
    csv.num("latency_min", r.host_latency.min_us, "us");
    csv.num("latency_p50", r.host_latency.p50_us, "us");
    csv.num("latency_p99", r.host_latency.p99_us, "us");
    csv.num("latency_p9999", r.host_latency.p9999_us, "us");
    csv.num("latency_worst", r.host_latency.worst_us, "us");

    csv.count("rx_packets", r.rx_packets, "packets");
    csv.count("tx_packets", r.tx_packets, "packets");
    csv.count("statuses", r.statuses, "packets");
    csv.count("recovery_episodes", r.recovery_episodes, "-");
    csv.count("recovery_requests", r.recovery_requests, "-");
    csv.count("stale_blocks_dropped", r.stale_blocks_dropped, "blocks");
    csv.count("gap_count", r.gaps.size(), "-");
    csv.num("gap_max", r.gap_max_us, "us");
    csv.num("gap_total", r.gap_total_us, "us");
    csv.count("samples_played", r.samples_played, "samples");
    csv.count("zeros_played", r.zeros_played, "samples");
    csv.count("transforms_per_block", r.transforms_per_block, "-");
    return csv.s;
}

std::string report_text(const ScenarioReport& r)
{
    std::string out;
    char b[160];
    std::snprintf(b, sizeof(b), "scenario: %s, %zux%zu, spp %zu @ %.1f MS/s\n",
                  mode_name(r.mode), r.n_ports, r.n_ports, r.spp, r.sample_rate / 1e6);
    out += b;
    std::snprintf(b, sizeof(b), "predicted a2a %.3f us, rtt %.3f us\n", r.predicted_a2a_us,
                  r.rtt_us);
    out += b;
    for (size_t j = 0; j < r.a2a.size(); j++) {
        for (size_t i = 0; i < r.a2a[j].size(); i++) {
            if (r.a2a[j][i])
                std::snprintf(b, sizeof(b),
                              "a2a[%zu][%zu] measured %.3f us (corr %.3f)\n", j, i,
                              r.a2a[j][i]->delay_us, r.a2a[j][i]->peak_corr);
            else
                std::snprintf(b, sizeof(b), "a2a[%zu][%zu] no signal\n", j, i);
            out += b;
        }
    }
    std::snprintf(b, sizeof(b), "worst a2a deviation from model: %.0f ticks\n",
                  r.a2a_model_dev_ticks);
    out += b;
    for (size_t j = 0; j < r.est_err_db.size(); j++) {
        for (size_t i = 0; i < r.est_err_db[j].size(); i++) {
            if (std::isnan(r.est_err_db[j][i]))
                std::snprintf(b, sizeof(b), "channel estimate [%zu][%zu]: not available\n",
                              j, i);
            else
                std::snprintf(b, sizeof(b), "channel estimate [%zu][%zu]: %.1f dB error\n",
                              j, i, r.est_err_db[j][i]);
            out += b;
        }
    }
    if (r.host_latency.total > 0) {
        std::snprintf(b, sizeof(b),
                      "host latency min/p50/p99/worst: %.3f/%.3f/%.3f/%.3f us (%llu blocks)\n",
                      r.host_latency.min_us, r.host_latency.p50_us, r.host_latency.p99_us,
                      r.host_latency.worst_us,
                      static_cast<unsigned long long>(r.host_latency.total));
        out += b;
    }
    std::snprintf(b, sizeof(b),
                  "packets rx/tx %llu/%llu, statuses %llu, recoveries %llu (%llu requests)\n",
                  static_cast<unsigned long long>(r.rx_packets),
                  static_cast<unsigned long long>(r.tx_packets),
                  static_cast<unsigned long long>(r.statuses),
                  static_cast<unsigned long long>(r.recovery_episodes),
                  static_cast<unsigned long long>(r.recovery_requests));
    out += b;
    if (r.gaps.empty()) {
        out += "gaps: none\n";
    } else {
        std::snprintf(b, sizeof(b),
                      "gaps: %zu episode(s), max %.3f us, total %.3f us, %llu stale "
                      "blocks dropped\n",
                      r.gaps.size(), r.gap_max_us, r.gap_total_us,
                      static_cast<unsigned long long>(r.stale_blocks_dropped));
        out += b;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Runner
// ---------------------------------------------------------------------------

ScenarioRunner::ScenarioRunner(ScenarioConfig cfg)
    : cfg_(std::move(cfg))
{
    cfg_.validate();
    model_ = cfg_.model();

    Rng master(cfg_.seed);
    const uint64_t cir_seed = master.next_u64();
    const uint64_t excite_seed = master.next_u64();
    const uint64_t link_seed = master.next_u64();

    layout_ = plan_excitation(cfg_);
    Rng excite_rng(excite_seed);
    excitation_ = build_excitation(layout_, cfg_.n_ports, excite_rng);

    if (!cfg_.cir_file.empty()) {
        cir_ = load_cir(cfg_.cir_file);
        if (cir_.size() != cfg_.n_ports || cir_.front().size() != cfg_.n_ports)
            throw ConfigError("CIR file shape does not match the port count");
    } else if (cfg_.mode == Mode::LtiEmulation) {
        Rng cir_rng(cir_seed);
        cir_ = make_random_cir(cir_rng, cfg_.n_ports, cfg_.n_ports, cfg_.cir_taps);
        scale_cir_to_peak(cir_, excitation_);
    } else {
        cir_ = delta_cir(cfg_.n_ports);
    }

    for (size_t i = 0; i < cfg_.n_ports; i++) {
        SimNetConfig up, down;
        up.latency = down.latency = cfg_.transport_latency;
        up.jitter_max = down.jitter_max = cfg_.transport_jitter;
        up.seed = link_seed + 2 * i;
        down.seed = link_seed + 2 * i + 1;
        to_host_.push_back(std::make_unique<SimLink>(up));
        to_device_.push_back(std::make_unique<SimLink>(down));

        DeviceConfig dc;
        dc.sample_rate = cfg_.sample_rate;
        dc.spp = cfg_.spp;
        dc.capacity_bytes = cfg_.capacity_bytes;
        dc.adc_delay = cfg_.adc_delay;
        dc.dac_delay = cfg_.dac_delay;
        dc.status_cadence = cfg_.status_cadence;
        dc.epid = static_cast<uint16_t>(0x0010 + i);
        dc.host_epid = 0x0001;
        devices_.push_back(std::make_unique<DeviceSim>(dc, *to_host_[i], *to_device_[i]));
        devices_[i]->set_input(excitation_[i]);

        TxStreamEngine::Config ec;
        ec.device_epid = dc.epid;
        ec.capacity_bytes = cfg_.capacity_bytes;
        ec.resync_lead_ticks = model_.host_delta() + cfg_.late_delay_ticks;
        engines_.emplace_back(ec);
        engines_[i].start(0);
    }
    rx_streams_.resize(cfg_.n_ports);
    submit_q_.resize(cfg_.n_ports);

    if (cfg_.mode == Mode::LtiEmulation)
        emulator_ = std::make_unique<MimoEmulator<float>>(cir_, cfg_.spp);

    horizon_ = layout_.total_len + model_.analog_to_analog() + cfg_.late_delay_ticks +
               8 * cfg_.transport_latency + 2 * model_.host_delta() + 8 * cfg_.spp + 4096;

    if (!cfg_.capture_file.empty()) {
        capture_.open(cfg_.capture_file, std::ios::binary | std::ios::trunc);
        if (!capture_)
            throw ConfigError("cannot open capture file: " + cfg_.capture_file);
        capture_.write(kCaptureMagic, sizeof(kCaptureMagic));
    }
}

ScenarioReport ScenarioRunner::run()
{
    for (uint64_t t = 0; t < horizon_; t++) {
        for (auto& d : devices_)
            d->advance(t + 1);
        host_step(t);
    }
    return finalize();
}

void ScenarioRunner::host_step(uint64_t t)
{
    for (size_t i = 0; i < cfg_.n_ports; i++) {
        while (auto bytes = to_host_[i]->poll(t)) {
            record(0, static_cast<uint8_t>(i), t, *bytes);
            ChdrPacket pkt = decode_packet(*bytes);
            switch (pkt.header.pkt_type) {
            case PktType::DataWithTs:
            case PktType::DataNoTs: {
                RxStream::Result r = rx_streams_[i].on_packet(pkt);
                rx_packets_++;
                if (i == 0)
                    rx_arrivals_port0_.push_back(t);
                on_rx_block(i, std::move(r.block), r.eob, t);
                break;
            }
            case PktType::StreamStatus:
            case PktType::StreamCmd:
                if (auto req = engines_[i].on_packet(pkt, t))
                    send_to_device(i, *req, t);
                break;
            default:
                break;
            }
        }
    }
    for (size_t i = 0; i < cfg_.n_ports; i++)
        pump_submissions(i, t);
}

void ScenarioRunner::on_rx_block(size_t port, SampleBlock block, bool eob, uint64_t t)
{
    const uint64_t t0 = block.start_tick;
    PairSlot& slot = pairing_[t0];
    if (slot.in.empty()) {
        slot.in.resize(cfg_.n_ports);
        slot.present.assign(cfg_.n_ports, false);
    }
    if (!slot.present[port]) {
        slot.present[port] = true;
        slot.have++;
    }
    slot.in[port] = std::move(block.samples);
    slot.eob |= eob;
    if (slot.have == cfg_.n_ports) {
        process_slot(t0, slot, t);
        pairing_.erase(t0);
    }
}

void ScenarioRunner::process_slot(uint64_t t0, PairSlot& slot, uint64_t t)
{
    const uint64_t ordinal = processed_blocks_++;
    const uint64_t extra =
        (cfg_.late_block && *cfg_.late_block == ordinal) ? cfg_.late_delay_ticks : 0;
    const uint64_t ready = t + cfg_.processing_ticks + extra;
    const uint64_t ts = t0 + model_.host_delta();
    latencies_us_.push_back(static_cast<double>(ready - t0) * 1e6 / cfg_.sample_rate);

    std::vector<std::vector<Cf32>> outs;
    if (emulator_) {
        outs.assign(cfg_.n_ports, std::vector<Cf32>(cfg_.spp));
        std::vector<std::span<const Cf32>> ins;
        std::vector<std::span<Cf32>> out_spans;
        ins.reserve(cfg_.n_ports);
        out_spans.reserve(cfg_.n_ports);
        for (size_t i = 0; i < cfg_.n_ports; i++) {
            ins.emplace_back(slot.in[i]);
            out_spans.emplace_back(outs[i]);
        }
        emulator_->process(std::span<const std::span<const Cf32>>(ins),
                           std::span<const std::span<Cf32>>(out_spans));
    } else {
        outs = std::move(slot.in);
    }

    for (size_t j = 0; j < cfg_.n_ports; j++) {
        PendingSubmit ps;
        ps.ready = ready;
        ps.block.samples = std::move(outs[j]);
        ps.block.start_tick = ts;
        ps.eob = slot.eob;
        submit_q_[j].push_back(std::move(ps));
    }
}

void ScenarioRunner::pump_submissions(size_t port, uint64_t t)
{
    if (auto pkt = engines_[port].poll_pending())
        send_to_device(port, *pkt, t);

    auto& q = submit_q_[port];
    while (!q.empty() && q.front().ready <= t) {
        if (engines_[port].state() != TxState::Streaming)
            break; // recovery in progress; blocks wait (and most will go stale)
        if (q.front().block.start_tick < engines_[port].resumption_tick()) {
            stale_dropped_++;
            q.pop_front();
            continue; // its air time lies inside the gap; never retransmitted
        }
        if (!engines_[port].can_accept())
            break; // out of credits
        auto pkt = engines_[port].submit_block(q.front().block, q.front().eob);
        q.pop_front();
        if (pkt)
            send_to_device(port, *pkt, t);
    }
}

void ScenarioRunner::send_to_device(size_t port, const ChdrPacket& pkt, uint64_t t)
{
    std::vector<uint8_t> bytes = encode_packet(pkt);
    record(1, static_cast<uint8_t>(port), t, bytes);
    to_device_[port]->send(std::move(bytes), t);
}

void ScenarioRunner::record(uint8_t dir, uint8_t port, uint64_t t,
                            const std::vector<uint8_t>& bytes)
{
    if (!capture_.is_open())
        return;
    std::vector<uint8_t> hdr;
    hdr.reserve(16);
    put_le64(hdr, t);
    hdr.push_back(dir);
    hdr.push_back(port);
    put_le16(hdr, 0);
    put_le32(hdr, static_cast<uint32_t>(bytes.size()));
    capture_.write(reinterpret_cast<const char*>(hdr.data()),
                   static_cast<std::streamsize>(hdr.size()));
    capture_.write(reinterpret_cast<const char*>(bytes.data()),
                   static_cast<std::streamsize>(bytes.size()));
}

ScenarioReport ScenarioRunner::finalize()
{
    if (capture_.is_open())
        capture_.close();

    ScenarioReport r;
    r.mode = cfg_.mode;
    r.sample_rate = cfg_.sample_rate;
    r.spp = cfg_.spp;
    r.n_ports = cfg_.n_ports;
    r.model = model_;
    const double tick_us = 1e6 / cfg_.sample_rate;
    const uint64_t predicted = model_.analog_to_analog();
    r.predicted_a2a_us = static_cast<double>(predicted) * tick_us;
    r.rtt_us = 2.0 * static_cast<double>(cfg_.transport_latency) * tick_us;

    const size_t n = cfg_.n_ports;
    std::vector<std::vector<Cf32>> y(n);
    for (size_t j = 0; j < n; j++) {
        y[j] = devices_[j]->analog_out();
        if (y[j].size() < horizon_)
            y[j].resize(horizon_, Cf32(0));
    }

    r.a2a.assign(n, std::vector<std::optional<A2aResult>>(n));
    double worst_dev = 0;
    bool any_a2a = false;
    for (size_t j = 0; j < n; j++) {
        for (size_t i = 0; i < n; i++) {
            try {
                r.a2a[j][i] = measure_a2a(excitation_[i], y[j], cfg_.sample_rate);
                const double dev = std::abs(static_cast<double>(r.a2a[j][i]->delay_ticks) -
                                            static_cast<double>(predicted));
                worst_dev = std::max(worst_dev, dev);
                any_a2a = true;
            } catch (const NoSignal&) {
                r.a2a[j][i] = std::nullopt;
            }
        }
    }
    r.a2a_model_dev_ticks = any_a2a ? worst_dev : std::nan("");

    r.est_err_db.assign(n, std::vector<double>(n, std::nan("")));
    double worst_est = -std::numeric_limits<double>::infinity();
    bool any_est = false;
    for (size_t j = 0; j < n; j++) {
        for (size_t i = 0; i < n; i++) {
            const size_t off_x = layout_.sounding_offset[i];
            const size_t off_y = off_x + layout_.zc_settle * layout_.zc_period +
                                 static_cast<size_t>(predicted);
            std::span<const Cf32> period(excitation_[i].data() + off_x, layout_.zc_period);
            try {
                std::vector<Cf32> est = estimate_channel(period, y[j], off_y,
                                                         layout_.zc_measure,
                                                         cir_[j][i].size());
                r.est_err_db[j][i] = error_db(est, cir_[j][i]);
                worst_est = std::max(worst_est, r.est_err_db[j][i]);
                any_est = true;
            } catch (const Error&) {
                // leave this pair unreported
            }
        }
    }
    r.worst_est_err_db = any_est ? worst_est : std::nan("");

    if (!latencies_us_.empty())
        r.host_latency = make_histogram(latencies_us_, cfg_.bin_width_us);
    else
        r.host_latency.bin_width_us = cfg_.bin_width_us;

    if (rx_arrivals_port0_.size() >= 2) {
        uint64_t cadence = rx_arrivals_port0_[1] - rx_arrivals_port0_[0];
        for (size_t k = 2; k < rx_arrivals_port0_.size(); k++)
            if (rx_arrivals_port0_[k] - rx_arrivals_port0_[k - 1] != cadence)
                cadence = 0;
        r.rx_cadence_ticks = cadence;
    }

    r.rx_packets = rx_packets_;
    r.stale_blocks_dropped = stale_dropped_;
    for (size_t i = 0; i < n; i++) {
        r.tx_packets += engines_[i].packets_sent();
        r.recovery_episodes += engines_[i].recovery_episodes();
        r.recovery_requests += engines_[i].recovery_requests_sent();
        r.statuses += devices_[i]->statuses_sent();
        r.samples_played += devices_[i]->samples_played();
        r.zeros_played += devices_[i]->zeros_played();
        for (const GapEpisode& g : devices_[i]->gap_episodes()) {
            r.gaps.push_back(g);
            const double us = static_cast<double>(g.length()) * tick_us;
            r.gap_max_us = std::max(r.gap_max_us, us);
            r.gap_total_us += us;
        }
    }
    if (emulator_ && emulator_->blocks_processed() > 0)
        r.transforms_per_block = emulator_->transform_count() / emulator_->blocks_processed();
    return r;
}

} // namespace chdrt
