// chdr-rt: closed-loop streaming simulator CLI.
//
//   chdr-rt run     one scenario, report to stdout and optional CSV files
//   chdr-rt verify  fast self-checks, PASS/FAIL per check
//   chdr-rt bench   convolver and codec throughput
//   chdr-rt decode  dump a packet capture produced by run --capture
//
// Exit codes: 0 success, 1 runtime failure, 2 bad usage or configuration.

#include <chrono>
#include <cmath>
#include <complex>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "chdrt/chdr.hpp"
#include "chdrt/config.hpp"
#include "chdrt/errors.hpp"
#include "chdrt/scenario.hpp"
#include "chdrt/stream.hpp"
#include "chdrt/upols.hpp"
#include "chdrt/util.hpp"

using namespace chdrt;

namespace {

void write_file(const std::string& path, const std::string& content)
{
    std::ofstream f(path, std::ios::binary);
    if (!f)
        throw ConfigError("cannot write " + path);
    f << content;
}

uint64_t seed_from_env()
{
    const char* env = std::getenv("CHDR_RT_SEED");
    if (!env)
        return 1;
    char* end = nullptr;
    const unsigned long long v = std::strtoull(env, &end, 10);
    if (end == env || *end != '\0')
        throw ConfigError("CHDR_RT_SEED is not a number");
    return v;
}

// ---------------------------------------------------------------------------
// run
// ---------------------------------------------------------------------------

struct RunArgs {
    std::string config_path;
    std::string mode;
    uint64_t seed = 0;
    size_t spp = 0;
    size_t ports = 0;
    size_t taps = 0;
    std::string cir_path;
    uint64_t jitter = 0;
    size_t payload_blocks = 0;
    int64_t late_block = -1;
    uint64_t late_delay = 0;
    std::string out_path;
    std::string hist_path;
    std::string capture_path;
    std::vector<std::string> overrides;
};

int cmd_run(const CLI::App& sub, RunArgs& a)
{
    ScenarioConfig cfg;
    cfg.seed = seed_from_env();

    if (!a.config_path.empty())
        apply_settings(cfg, parse_kv_file(a.config_path));

    // explicit flags override the file
    if (sub.count("--mode"))
        apply_setting(cfg, "mode", a.mode);
    if (sub.count("--seed"))
        cfg.seed = a.seed;
    if (sub.count("--spp"))
        cfg.spp = a.spp;
    if (sub.count("--ports"))
        cfg.n_ports = a.ports;
    if (sub.count("--taps"))
        cfg.cir_taps = a.taps;
    if (sub.count("--cir"))
        cfg.cir_file = a.cir_path;
    if (sub.count("--jitter"))
        cfg.transport_jitter = a.jitter;
    if (sub.count("--payload-blocks"))
        cfg.payload_blocks = a.payload_blocks;
    if (sub.count("--late-block"))
        cfg.late_block = static_cast<uint64_t>(a.late_block);
    if (sub.count("--late-delay"))
        cfg.late_delay_ticks = a.late_delay;
    if (sub.count("--capture"))
        cfg.capture_file = a.capture_path;

    // trailing key=value pairs have the last word
    for (const std::string& kv : a.overrides) {
        const size_t eq = kv.find('=');
        if (eq == std::string::npos)
            throw ConfigError("override must be key=value, got '" + kv + "'");
        apply_setting(cfg, kv.substr(0, eq), kv.substr(eq + 1));
    }

    ScenarioRunner runner(cfg);
    ScenarioReport rep = runner.run();

    std::fputs(report_text(rep).c_str(), stdout);
    if (!a.out_path.empty())
        write_file(a.out_path, report_csv(rep));
    if (!a.hist_path.empty())
        write_file(a.hist_path, histogram_csv(rep.host_latency));
    return 0;
}

// ---------------------------------------------------------------------------
// verify
// ---------------------------------------------------------------------------

int cmd_verify()
{
    using Cd = std::complex<double>;
    int failed = 0;
    auto report = [&](const char* name, bool ok, const std::string& detail) {
        std::printf("%s %s: %s\n", ok ? "PASS" : "FAIL", name, detail.c_str());
        if (!ok)
            failed++;
    };

    { // header golden vectors
        ChdrHeader h;
        h.pkt_type = PktType::DataWithTs;
        h.seq_num = 1;
        h.length = 24;
        h.dst_epid = 2;
        ChdrHeader s;
        s.pkt_type = PktType::StreamStatus;
        s.length = 8;
        const bool ok = encode_header(h) == 0x00E0000100180002ULL &&
                        encode_header(s) == 0x0020000000080000ULL;
        report("codec golden vectors", ok, ok ? "bit-exact" : "MISMATCH");
    }

    { // packet round trip
        SampleBlock blk;
        blk.start_tick = 4096;
        blk.samples.assign(512, Cf32(0.25f, -0.5f));
        ChdrPacket p = make_data_packet(blk, 3, 2, true);
        auto wire = encode_packet(p);
        ChdrPacket back = decode_packet(wire);
        const bool ok = wire.size() == 2064 && back.header.seq_num == 3 &&
                        back.timestamp == 4096 && back.payload == p.payload;
        report("packet round trip", ok,
               ok ? "2064-byte data packet intact" : "corrupted");
    }

    { // convolver against the direct form
        Rng rng(100);
        std::vector<Cd> h(128), x(64 * 20);
        for (auto& v : h)
            v = rng.next_cgauss();
        for (auto& v : x)
            v = rng.next_cgauss();
        UpolsConvolver<double> conv(h, 64);
        std::vector<Cd> y(x.size());
        for (size_t off = 0; off < x.size(); off += 64)
            conv.process(std::span<const Cd>(x.data() + off, 64),
                         std::span<Cd>(y.data() + off, 64));
        double num = 0, den = 0;
        for (size_t n = 0; n < x.size(); n++) {
            Cd acc(0);
            const size_t tmax = std::min(h.size() - 1, n);
            for (size_t tau = 0; tau <= tmax; tau++)
                acc += h[tau] * x[n - tau];
            num += std::norm(y[n] - acc);
            den += std::norm(acc);
        }
        const double err = std::sqrt(num / den);
        char buf[64];
        std::snprintf(buf, sizeof(buf), "rel rms %.2e (tol 1e-9)", err);
        report("fast convolution", err <= 1e-9, buf);
    }

    { // closed loop hits the latency model exactly
        ScenarioConfig cfg;
        cfg.mode = Mode::PassThrough;
        cfg.spp = 256;
        cfg.cir_taps = 32;
        cfg.seed = 5;
        ScenarioRunner runner(cfg);
        auto rep = runner.run();
        const bool ok = rep.a2a[0][0] && rep.a2a_model_dev_ticks == 0.0 &&
                        rep.recovery_episodes == 0;
        char buf[96];
        std::snprintf(buf, sizeof(buf), "measured %.2f us, model %.2f us",
                      rep.a2a[0][0] ? rep.a2a[0][0]->delay_us : -1.0, rep.predicted_a2a_us);
        report("closed-loop latency", ok, buf);
    }

    { // determinism
        ScenarioConfig cfg;
        cfg.mode = Mode::LtiEmulation;
        cfg.spp = 256;
        cfg.cir_taps = 64;
        cfg.seed = 6;
        auto one = [](const ScenarioConfig& c) {
            ScenarioRunner r(c);
            return report_csv(r.run());
        };
        const bool ok = one(cfg) == one(cfg);
        report("report determinism", ok, ok ? "byte-identical" : "DIVERGED");
    }

    std::printf("%s\n", failed == 0 ? "all checks passed" : "CHECKS FAILED");
    return failed == 0 ? 0 : 1;
}

// ---------------------------------------------------------------------------
// bench
// ---------------------------------------------------------------------------

int cmd_bench(size_t blocks)
{
    using Cd = std::complex<double>;
    using clock = std::chrono::steady_clock;
    Rng rng(1);

    { // convolver throughput, the scenario's configuration
        const size_t B = 256, L = 512;
        std::vector<Cd> h(L), in(B), out(B);
        for (auto& v : h)
            v = rng.next_cgauss();
        for (auto& v : in)
            v = rng.next_cgauss();
        UpolsConvolver<double> conv(h, B);
        const auto t0 = clock::now();
        for (size_t i = 0; i < blocks; i++)
            conv.process(in, out);
        const double secs = std::chrono::duration<double>(clock::now() - t0).count();
        std::printf("upols   L=%zu B=%zu: %8.0f blocks/s, %7.2f Msamples/s\n", L, B,
                    blocks / secs, blocks * B / secs / 1e6);
    }

    { // 2x2 emulator, single precision as used in the loop
        using Cf = std::complex<float>;
        const size_t B = 256, L = 512;
        MimoEmulator<float>::CirMatrixT cirs(2, std::vector<std::vector<Cf>>(2));
        for (auto& row : cirs)
            for (auto& h : row) {
                h.resize(L);
                for (auto& v : h)
                    v = Cf(rng.next_cgauss());
            }
        MimoEmulator<float> emu(cirs, B);
        std::vector<Cf> a(B), b(B), oa(B), ob(B);
        std::span<const Cf> ins[2] = { a, b };
        std::span<Cf> outs[2] = { oa, ob };
        const auto t0 = clock::now();
        for (size_t i = 0; i < blocks; i++)
            emu.process(std::span<const std::span<const Cf>>(ins, 2),
                        std::span<const std::span<Cf>>(outs, 2));
        const double secs = std::chrono::duration<double>(clock::now() - t0).count();
        std::printf("mimo2x2 L=%zu B=%zu: %8.0f blocks/s, %7.2f Msamples/s per port\n", L,
                    B, blocks / secs, blocks * B / secs / 1e6);
    }

    { // codec throughput
        SampleBlock blk;
        blk.start_tick = 0;
        blk.samples.assign(512, Cf32(0.1f, -0.1f));
        const size_t n = std::max<size_t>(blocks * 16, 1000);
        const auto t0 = clock::now();
        uint64_t bytes = 0;
        for (size_t i = 0; i < n; i++) {
            blk.start_tick = i;
            auto wire = encode_packet(make_data_packet(blk, static_cast<uint16_t>(i), 2, true));
            ChdrPacket back = decode_packet(wire);
            bytes += wire.size() + back.payload.size();
        }
        const double secs = std::chrono::duration<double>(clock::now() - t0).count();
        std::printf("codec   512 samples: %8.0f pkts/s encode+decode, %7.2f Gbit/s (%llu B)\n",
                    n / secs, bytes * 8 / secs / 1e9,
                    static_cast<unsigned long long>(bytes));
    }
    return 0;
}

// ---------------------------------------------------------------------------
// decode
// ---------------------------------------------------------------------------

int cmd_decode(const std::string& path, uint64_t max_records)
{
    std::ifstream f(path, std::ios::binary);
    if (!f)
        throw std::runtime_error("cannot open " + path);
    std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(f)),
                               std::istreambuf_iterator<char>());
    if (bytes.size() < 8 || !std::equal(kCaptureMagic, kCaptureMagic + 8, bytes.begin()))
        throw std::runtime_error(path + " is not a packet capture");

    size_t off = 8;
    uint64_t index = 0;
    while (off < bytes.size() && (max_records == 0 || index < max_records)) {
        if (off + 16 > bytes.size())
            throw std::runtime_error("truncated record header");
        const uint64_t tick = get_le64(bytes.data() + off);
        const uint8_t dir = bytes[off + 8];
        const uint8_t port = bytes[off + 9];
        const uint32_t len = get_le32(bytes.data() + off + 12);
        if (off + 16 + len > bytes.size())
            throw std::runtime_error("truncated record body");

        std::vector<uint8_t> pkt(bytes.begin() + static_cast<ptrdiff_t>(off + 16),
                                 bytes.begin() + static_cast<ptrdiff_t>(off + 16 + len));
        std::printf("#%05llu t=%-10llu %s port%u ", static_cast<unsigned long long>(index),
                    static_cast<unsigned long long>(tick), dir == 0 ? "->host" : "->dev ",
                    port);
        try {
            ChdrPacket p = decode_packet(pkt);
            std::printf("%-12s seq=%-5u len=%-5u", pkt_type_name(p.header.pkt_type),
                        p.header.seq_num, p.header.length);
            if (p.timestamp)
                std::printf(" ts=%llu", static_cast<unsigned long long>(*p.timestamp));
            if (p.header.eob)
                std::printf(" eob");
            if (p.header.pkt_type == PktType::StreamStatus) {
                StreamStatus s = parse_status(p);
                std::printf(" %s acked=%llu cap=%llu",
                            s.status == StatusCode::Ok ? "ok" : "seq_error",
                            static_cast<unsigned long long>(s.acked_bytes),
                            static_cast<unsigned long long>(s.capacity_bytes));
            } else if (p.header.pkt_type == PktType::StreamCmd) {
                StreamCmd c = parse_cmd(p);
                std::printf(" code=0x%02llx arg0=%llu arg1=%llu",
                            static_cast<unsigned long long>(c.code),
                            static_cast<unsigned long long>(c.arg0),
                            static_cast<unsigned long long>(c.arg1));
            }
            std::printf("\n");
        } catch (const Error& e) {
            std::printf("undecodable (%s)\n", e.what());
        }
        off += 16 + len;
        index++;
    }
    std::printf("%llu records%s\n", static_cast<unsigned long long>(index),
                off < bytes.size() ? " (more follow)" : "");
    return 0;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{ "closed-loop CHDR streaming simulator" };
    app.require_subcommand(1);

    RunArgs ra;
    CLI::App* run = app.add_subcommand("run", "run one scenario");
    run->add_option("--config", ra.config_path, "key=value scenario file");
    run->add_option("--mode", ra.mode, "pass_through | lti_emulation");
    run->add_option("--seed", ra.seed, "master seed (default: CHDR_RT_SEED or 1)");
    run->add_option("--spp", ra.spp, "samples per packet");
    run->add_option("--ports", ra.ports, "port (device) count");
    run->add_option("--taps", ra.taps, "channel length in taps");
    run->add_option("--cir", ra.cir_path, "channel file (overrides the generated one)");
    run->add_option("--jitter", ra.jitter, "transport jitter in ticks");
    run->add_option("--payload-blocks", ra.payload_blocks, "extra stream body blocks");
    run->add_option("--late-block", ra.late_block, "hold this block ordinal back")
        ->check(CLI::NonNegativeNumber);
    run->add_option("--late-delay", ra.late_delay, "ticks to hold the late block");
    run->add_option("--out", ra.out_path, "write the report CSV here");
    run->add_option("--hist", ra.hist_path, "write the latency histogram CSV here");
    run->add_option("--capture", ra.capture_path, "record every host-side packet here");
    run->add_option("overrides", ra.overrides, "trailing key=value settings");

    CLI::App* verify = app.add_subcommand("verify", "fast self-checks");

    size_t bench_blocks = 2000;
    CLI::App* bench = app.add_subcommand("bench", "convolver and codec throughput");
    bench->add_option("--blocks", bench_blocks, "blocks per measurement");

    std::string decode_path;
    uint64_t decode_max = 0;
    CLI::App* decode = app.add_subcommand("decode", "dump a packet capture");
    decode->add_option("capture", decode_path, "capture file from run --capture")
        ->required();
    decode->add_option("--max", decode_max, "stop after this many records (0 = all)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (app.got_subcommand(run))
            return cmd_run(*run, ra);
        if (app.got_subcommand(verify))
            return cmd_verify();
        if (app.got_subcommand(bench))
            return cmd_bench(bench_blocks);
        if (app.got_subcommand(decode))
            return cmd_decode(decode_path, decode_max);
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "configuration error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 2;
}
