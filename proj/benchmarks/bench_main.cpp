#include "etlab/capture.hpp"
#include "etlab/detector.hpp"
#include "etlab/fea.hpp"
#include "etlab/grooming.hpp"
#include "etlab/trace_gen.hpp"

#include <benchmark/benchmark.h>

using namespace etlab;

namespace {

void BM_ParseNtTrans(benchmark::State& state) {
    smb::NtTransParams p;
    p.total_data_count = 0x10000;
    p.data = inert_filler(static_cast<std::size_t>(state.range(0)));
    smb::SmbHeader h;
    h.command = smb::command::kNtTransact;
    const auto bytes = smb::serialize_smb(smb::make_message(h, smb::encode_nt_trans_request(p)));
    for (auto _ : state) benchmark::DoNotOptimize(smb::parse_smb(bytes));
    state.SetBytesProcessed(static_cast<std::int64_t>(state.iterations() * bytes.size()));
}
BENCHMARK(BM_ParseNtTrans)->Arg(64)->Arg(1000)->Arg(4000);

void BM_ConvertCraftedList(benchmark::State& state) {
    const auto list = fea::craft_malicious_list({}, SrvnetHeaderImage{0x7A7A0000, 0x7A7A0000});
    const bool bug = state.range(0) != 0;
    for (auto _ : state) benchmark::DoNotOptimize(fea::convert_list(list, {.bug_enabled = bug}));
}
BENCHMARK(BM_ConvertCraftedList)->Arg(0)->Arg(1);

void BM_CanonicalGrooming(benchmark::State& state) {
    const auto script = pool::canonical_script(true);
    for (auto _ : state) benchmark::DoNotOptimize(pool::run_grooming_script(script));
}
BENCHMARK(BM_CanonicalGrooming)->Unit(benchmark::kMicrosecond);

void BM_GenerateTrace(benchmark::State& state) {
    std::uint64_t seed = 0;
    for (auto _ : state) benchmark::DoNotOptimize(capture::generate_trace(capture::Scenario::full_attack(), ++seed));
}
BENCHMARK(BM_GenerateTrace)->Unit(benchmark::kMillisecond);

void BM_IngestAndDetect(benchmark::State& state) {
    const auto bytes = capture::generate_trace(capture::Scenario::full_attack(), 1).serialize();
    for (auto _ : state) {
        detect::GroomDetector d;
        for (const auto& e : capture::read_capture(capture::CaptureFile::parse(bytes))) d.feed(e);
        benchmark::DoNotOptimize(d.finalize_all());
    }
    state.SetBytesProcessed(static_cast<std::int64_t>(state.iterations() * bytes.size()));
}
BENCHMARK(BM_IngestAndDetect)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
