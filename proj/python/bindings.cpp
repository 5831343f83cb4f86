// Python bindings for the chdrt library: packet codec, fast convolution,
// channel estimation, and the closed-loop scenario runner.

#include <pybind11/complex.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <complex>
#include <cstring>
#include <optional>
#include <span>
#include <vector>

#include "chdrt/chdr.hpp"
#include "chdrt/config.hpp"
#include "chdrt/errors.hpp"
#include "chdrt/metrics.hpp"
#include "chdrt/scenario.hpp"
#include "chdrt/upols.hpp"

namespace py = pybind11;
using namespace chdrt;

namespace {

using Cd = std::complex<double>;
template <typename T>
using ArrayT = py::array_t<T, py::array::c_style | py::array::forcecast>;

template <typename T>
std::span<const T> as_span(const ArrayT<T>& a)
{
    if (a.ndim() != 1)
        throw ConfigError("expected a one-dimensional array");
    return { a.data(), static_cast<size_t>(a.size()) };
}

template <typename T>
py::array_t<T> as_array(const std::vector<T>& v)
{
    py::array_t<T> out(static_cast<py::ssize_t>(v.size()));
    std::memcpy(out.mutable_data(), v.data(), v.size() * sizeof(T));
    return out;
}

std::vector<uint8_t> as_bytes(const py::bytes& b)
{
    const std::string_view s = b;
    return { s.begin(), s.end() };
}

py::dict a2a_dict(const A2aResult& r)
{
    py::dict d;
    d["delay_ticks"] = r.delay_ticks;
    d["delay_us"] = r.delay_us;
    d["peak_corr"] = r.peak_corr;
    return d;
}

py::dict report_dict(const ScenarioReport& r)
{
    py::dict d;
    d["mode"] = r.mode == Mode::PassThrough ? "pass_through" : "lti_emulation";
    d["sample_rate"] = r.sample_rate;
    d["spp"] = r.spp;
    d["ports"] = r.n_ports;
    d["predicted_a2a_us"] = r.predicted_a2a_us;
    d["rtt_us"] = r.rtt_us;

    py::list a2a;
    for (const auto& row : r.a2a) {
        py::list prow;
        for (const auto& cell : row)
            prow.append(cell ? py::object(a2a_dict(*cell)) : py::none());
        a2a.append(prow);
    }
    d["a2a"] = a2a;
    d["a2a_model_dev_ticks"] = r.a2a_model_dev_ticks;
    d["rx_cadence_ticks"] = r.rx_cadence_ticks;
    d["est_err_db"] = r.est_err_db;
    d["worst_est_err_db"] = r.worst_est_err_db;

    py::dict lat;
    lat["count"] = r.host_latency.total;
    lat["min_us"] = r.host_latency.min_us;
    lat["p50_us"] = r.host_latency.p50_us;
    lat["p99_us"] = r.host_latency.p99_us;
    lat["p9999_us"] = r.host_latency.p9999_us;
    lat["worst_us"] = r.host_latency.worst_us;
    d["host_latency"] = lat;

    d["rx_packets"] = r.rx_packets;
    d["tx_packets"] = r.tx_packets;
    d["statuses"] = r.statuses;
    d["recovery_episodes"] = r.recovery_episodes;
    d["recovery_requests"] = r.recovery_requests;
    d["stale_blocks_dropped"] = r.stale_blocks_dropped;
    py::list gaps;
    for (const auto& g : r.gaps) {
        py::dict gd;
        gd["start_tick"] = g.start_tick;
        gd["end_tick"] = g.end_tick;
        gaps.append(gd);
    }
    d["gaps"] = gaps;
    d["gap_max_us"] = r.gap_max_us;
    d["gap_total_us"] = r.gap_total_us;
    d["samples_played"] = r.samples_played;
    d["zeros_played"] = r.zeros_played;
    d["transforms_per_block"] = r.transforms_per_block;

    d["csv"] = report_csv(r);
    d["text"] = report_text(r);
    d["histogram_csv"] = histogram_csv(r.host_latency);
    return d;
}

} // namespace

PYBIND11_MODULE(chdr_rt, m)
{
    m.doc() = "CHDR packet codec, partitioned fast convolution, and a "
              "closed-loop low-latency streaming simulator";

    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p)
                std::rethrow_exception(p);
        } catch (const ConfigError& e) {
            PyErr_SetString(PyExc_ValueError, e.what());
        } catch (const Error& e) {
            PyErr_SetString(PyExc_RuntimeError, e.what());
        }
    });

    // ---- packet codec -----------------------------------------------------

    py::enum_<PktType>(m, "PktType")
        .value("Management", PktType::Management)
        .value("StreamStatus", PktType::StreamStatus)
        .value("StreamCmd", PktType::StreamCmd)
        .value("Control", PktType::Control)
        .value("DataNoTs", PktType::DataNoTs)
        .value("DataWithTs", PktType::DataWithTs);

    py::class_<ChdrHeader>(m, "ChdrHeader")
        .def(py::init<>())
        .def_readwrite("vc", &ChdrHeader::vc)
        .def_readwrite("eob", &ChdrHeader::eob)
        .def_readwrite("eov", &ChdrHeader::eov)
        .def_readwrite("pkt_type", &ChdrHeader::pkt_type)
        .def_readwrite("num_mdata", &ChdrHeader::num_mdata)
        .def_readwrite("seq_num", &ChdrHeader::seq_num)
        .def_readwrite("length", &ChdrHeader::length)
        .def_readwrite("dst_epid", &ChdrHeader::dst_epid)
        .def("__eq__", [](const ChdrHeader& a, const ChdrHeader& b) { return a == b; })
        .def("__repr__", [](const ChdrHeader& h) {
            char buf[128];
            std::snprintf(buf, sizeof(buf),
                          "ChdrHeader(%s, seq=%u, len=%u, epid=0x%04x%s)",
                          pkt_type_name(h.pkt_type), h.seq_num, h.length, h.dst_epid,
                          h.eob ? ", eob" : "");
            return std::string(buf);
        });

    m.def("encode_header", &encode_header, py::arg("header"),
          "Packs a header into its 64-bit little-endian wire word.");
    m.def("decode_header", &decode_header, py::arg("word"),
          "Unpacks a 64-bit wire word; raises on a reserved packet type.");
    m.def("pkt_type_name", &pkt_type_name, py::arg("pkt_type"));

    m.def(
        "encode_data_packet",
        [](const ArrayT<Cf32>& samples, uint64_t start_tick, uint16_t seq_num,
           uint16_t dst_epid, bool with_ts) {
            SampleBlock blk;
            const auto s = as_span(samples);
            blk.samples.assign(s.begin(), s.end());
            blk.start_tick = start_tick;
            const auto wire = encode_data_packet(blk, seq_num, dst_epid, with_ts);
            return py::bytes(reinterpret_cast<const char*>(wire.data()), wire.size());
        },
        py::arg("samples"), py::arg("start_tick") = 0, py::arg("seq_num") = 0,
        py::arg("dst_epid") = 0, py::arg("with_ts") = true,
        "Builds a data packet around complex64 samples (sc16 on the wire).");

    m.def(
        "decode_packet",
        [](const py::bytes& wire) {
            const auto bytes = as_bytes(wire);
            ChdrPacket p = decode_packet(bytes);
            py::dict d;
            d["header"] = p.header;
            d["timestamp"] = p.timestamp ? py::object(py::int_(*p.timestamp)) : py::none();
            d["payload"] = py::bytes(reinterpret_cast<const char*>(p.payload.data()),
                                     p.payload.size());
            return d;
        },
        py::arg("wire"),
        "Parses one packet; returns {header, timestamp, payload}.");

    m.def("quantize_sc16", &quantize_sc16, py::arg("value"));
    m.def(
        "wire_to_samples",
        [](const py::bytes& payload) {
            return as_array(wire_to_samples(as_bytes(payload)));
        },
        py::arg("payload"), "Converts an sc16 payload back to complex64 samples.");

    // ---- fast convolution ------------------------------------------------

    py::class_<UpolsConvolver<double>>(m, "UpolsConvolver",
                                       "Uniformly partitioned overlap-save convolver; "
                                       "processes fixed-size blocks with zero latency.")
        .def(py::init([](const ArrayT<Cd>& h, size_t block_len) {
                 return new UpolsConvolver<double>(as_span(h), block_len);
             }),
             py::arg("h"), py::arg("block_len"))
        .def_property_readonly("block_len", &UpolsConvolver<double>::block_len)
        .def_property_readonly("partitions", &UpolsConvolver<double>::partitions)
        .def(
            "process",
            [](UpolsConvolver<double>& self, const ArrayT<Cd>& in) {
                const auto s = as_span(in);
                std::vector<Cd> out(s.size());
                self.process(s, out);
                return as_array(out);
            },
            py::arg("block"), "Convolves exactly one block and returns it.")
        .def(
            "set_filter",
            [](UpolsConvolver<double>& self, const ArrayT<Cd>& h) {
                self.set_filter(as_span(h));
            },
            py::arg("h"),
            "Stages a replacement impulse response for the next block boundary.")
        .def_property_readonly("transform_count", &UpolsConvolver<double>::transform_count)
        .def_property_readonly("spectral_mac_count",
                               &UpolsConvolver<double>::spectral_mac_count)
        .def_property_readonly("blocks_processed", &UpolsConvolver<double>::blocks_processed);

    py::class_<MimoEmulator<double>>(m, "MimoEmulator",
                                     "LTI channel matrix emulator: out[j] = sum_i "
                                     "cir[j][i] * in[i], block by block.")
        .def(py::init([](const std::vector<std::vector<ArrayT<Cd>>>& cirs,
                         size_t block_len) {
                 MimoEmulator<double>::CirMatrixT mat(cirs.size());
                 for (size_t j = 0; j < cirs.size(); j++)
                     for (const auto& h : cirs[j]) {
                         const auto s = as_span(h);
                         mat[j].emplace_back(s.begin(), s.end());
                     }
                 return new MimoEmulator<double>(mat, block_len);
             }),
             py::arg("cirs"), py::arg("block_len"))
        .def_property_readonly("block_len", &MimoEmulator<double>::block_len)
        .def_property_readonly("n_inputs", &MimoEmulator<double>::n_in)
        .def_property_readonly("n_outputs", &MimoEmulator<double>::n_out)
        .def(
            "process",
            [](MimoEmulator<double>& self, const std::vector<ArrayT<Cd>>& ins) {
                std::vector<std::span<const Cd>> in_spans;
                in_spans.reserve(ins.size());
                for (const auto& a : ins)
                    in_spans.push_back(as_span(a));
                std::vector<std::vector<Cd>> outs(self.n_out());
                std::vector<std::span<Cd>> out_spans;
                for (auto& o : outs) {
                    o.resize(self.block_len());
                    out_spans.emplace_back(o);
                }
                self.process(std::span<const std::span<const Cd>>(in_spans),
                             std::span<const std::span<Cd>>(out_spans));
                py::list result;
                for (const auto& o : outs)
                    result.append(as_array(o));
                return result;
            },
            py::arg("blocks"), "One block per input port; returns one per output port.")
        .def(
            "set_filter",
            [](MimoEmulator<double>& self, const std::vector<std::vector<ArrayT<Cd>>>& cirs) {
                MimoEmulator<double>::CirMatrixT mat(cirs.size());
                for (size_t j = 0; j < cirs.size(); j++)
                    for (const auto& h : cirs[j]) {
                        const auto s = as_span(h);
                        mat[j].emplace_back(s.begin(), s.end());
                    }
                self.set_filter(mat);
            },
            py::arg("cirs"))
        .def_property_readonly("transform_count", &MimoEmulator<double>::transform_count)
        .def_property_readonly("spectral_mac_count",
                               &MimoEmulator<double>::spectral_mac_count);

    // ---- measurement -----------------------------------------------------

    m.def(
        "measure_a2a",
        [](const ArrayT<Cf32>& reference, const ArrayT<Cf32>& observed,
           double sample_rate, double min_corr) {
            return a2a_dict(
                measure_a2a(as_span(reference), as_span(observed), sample_rate, min_corr));
        },
        py::arg("reference"), py::arg("observed"), py::arg("sample_rate") = 100e6,
        py::arg("min_corr") = 0.05,
        "Delay of the best-aligned copy of reference inside observed.");

    m.def(
        "estimate_channel",
        [](const ArrayT<Cf32>& period, const ArrayT<Cf32>& received, size_t offset,
           size_t n_periods, size_t taps) {
            return as_array(
                estimate_channel(as_span(period), as_span(received), offset, n_periods, taps));
        },
        py::arg("period"), py::arg("received"), py::arg("offset"), py::arg("n_periods"),
        py::arg("taps"),
        "Leading channel taps from the response to a periodic excitation.");

    m.def(
        "error_db",
        [](const ArrayT<Cf32>& estimate, const ArrayT<Cf32>& reference) {
            return error_db(as_span(estimate), as_span(reference));
        },
        py::arg("estimate"), py::arg("reference"),
        "Relative error energy in dB against the reference.");

    m.def(
        "zadoff_chu", [](size_t n) { return as_array(zadoff_chu(n)); }, py::arg("n"),
        "Constant-amplitude zero-autocorrelation sounding sequence.");

    m.def(
        "histogram",
        [](const ArrayT<double>& values_us, double bin_width_us) {
            const Histogram h = make_histogram(as_span(values_us), bin_width_us);
            py::dict d;
            d["count"] = h.total;
            d["min_us"] = h.min_us;
            d["p50_us"] = h.p50_us;
            d["p99_us"] = h.p99_us;
            d["p9999_us"] = h.p9999_us;
            d["worst_us"] = h.worst_us;
            d["csv"] = histogram_csv(h);
            return d;
        },
        py::arg("values_us"), py::arg("bin_width_us") = 0.087,
        "Fixed-width latency histogram with nearest-rank percentiles.");

    // ---- closed-loop scenario ---------------------------------------------

    m.def(
        "run_scenario",
        [](const py::kwargs& kwargs) {
            ScenarioConfig cfg;
            for (auto item : kwargs) {
                const auto key = py::cast<std::string>(item.first);
                const auto value = py::cast<std::string>(py::str(item.second));
                apply_setting(cfg, key, value);
            }
            ScenarioRunner runner(cfg);
            return report_dict(runner.run());
        },
        "Runs one closed-loop scenario; settings are the config-file keys "
        "(mode, spp, ports, seed, cir_taps, ...). Returns the full report as "
        "a dict including its csv and text renderings.");

    m.attr("__version__") = "1.0.0";
}
