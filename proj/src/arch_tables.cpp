#include <perfkit/events.hpp>

// Event encodings follow the Intel SDM volume 3B tables for each family.

namespace perfkit::events {

namespace {

constexpr const char* kCore2Events = R"(
event INSTR_RETIRED_ANY                    code 0x00 umask 0x00 scope core counters FIXC0
event CPU_CLK_UNHALTED_CORE                code 0x00 umask 0x00 scope core counters FIXC1
event SIMD_COMP_INST_RETIRED_PACKED_SINGLE code 0xCA umask 0x01 scope core counters PMC0,PMC1
event SIMD_COMP_INST_RETIRED_SCALAR_SINGLE code 0xCA umask 0x02 scope core counters PMC0,PMC1
event SIMD_COMP_INST_RETIRED_PACKED_DOUBLE code 0xCA umask 0x04 scope core counters PMC0,PMC1
event SIMD_COMP_INST_RETIRED_SCALAR_DOUBLE code 0xCA umask 0x08 scope core counters PMC0,PMC1
event L1D_ALL_REF                          code 0x43 umask 0x01 scope core counters PMC0,PMC1
event L1D_REPL                             code 0x45 umask 0x0F scope core counters PMC0,PMC1
event L1D_M_EVICT                          code 0x47 umask 0x00 scope core counters PMC0,PMC1
event L2_LINES_IN_THIS_CORE_ALL            code 0x24 umask 0x70 scope core counters PMC0,PMC1
event L2_RQSTS_THIS_CORE_ALL_MESI          code 0x2E umask 0x4F scope core counters PMC0,PMC1
event L2_RQSTS_SELF_I_STATE                code 0x2E umask 0x41 scope core counters PMC0,PMC1
event BUS_TRANS_MEM_THIS_CORE_THIS_A       code 0x6F umask 0x40 scope core counters PMC0,PMC1
event INST_RETIRED_LOADS                   code 0xC0 umask 0x01 scope core counters PMC0,PMC1
event INST_RETIRED_STORES                  code 0xC0 umask 0x02 scope core counters PMC0,PMC1
event BR_INST_RETIRED_ANY                  code 0xC4 umask 0x00 scope core counters PMC0,PMC1
event BR_INST_RETIRED_MISPRED              code 0xC5 umask 0x00 scope core counters PMC0,PMC1
event DTLB_MISSES_ANY                      code 0x08 umask 0x01 scope core counters PMC0,PMC1
)";

constexpr const char* kCore2Groups = R"(
group FLOPS_DP Double Precision MFlops/s
use SIMD_COMP_INST_RETIRED_PACKED_DOUBLE:PMC0
use SIMD_COMP_INST_RETIRED_SCALAR_DOUBLE:PMC1
metric Runtime [s] = runtime
metric CPI = CPU_CLK_UNHALTED_CORE / INSTR_RETIRED_ANY
metric DP MFlops/s = 1.0E-06 * (2 * SIMD_COMP_INST_RETIRED_PACKED_DOUBLE + SIMD_COMP_INST_RETIRED_SCALAR_DOUBLE) / runtime

group FLOPS_SP Single Precision MFlops/s
use SIMD_COMP_INST_RETIRED_PACKED_SINGLE:PMC0
use SIMD_COMP_INST_RETIRED_SCALAR_SINGLE:PMC1
metric Runtime [s] = runtime
metric CPI = CPU_CLK_UNHALTED_CORE / INSTR_RETIRED_ANY
metric SP MFlops/s = 1.0E-06 * (4 * SIMD_COMP_INST_RETIRED_PACKED_SINGLE + SIMD_COMP_INST_RETIRED_SCALAR_SINGLE) / runtime

group L2 L2 cache bandwidth in MBytes/s
use L1D_REPL:PMC0
use L1D_M_EVICT:PMC1
metric Runtime [s] = runtime
metric CPI = CPU_CLK_UNHALTED_CORE / INSTR_RETIRED_ANY
metric L2 bandwidth [MBytes/s] = 1.0E-06 * 64 * (L1D_REPL + L1D_M_EVICT) / runtime
metric L2 data volume [GBytes] = 1.0E-09 * 64 * (L1D_REPL + L1D_M_EVICT)

group MEM Main memory bandwidth in MBytes/s
use BUS_TRANS_MEM_THIS_CORE_THIS_A:PMC0
metric Runtime [s] = runtime
metric CPI = CPU_CLK_UNHALTED_CORE / INSTR_RETIRED_ANY
metric Memory bandwidth [MBytes/s] = 1.0E-06 * 64 * BUS_TRANS_MEM_THIS_CORE_THIS_A / runtime
metric Memory data volume [GBytes] = 1.0E-09 * 64 * BUS_TRANS_MEM_THIS_CORE_THIS_A

group CACHE L1 Data cache miss rate/ratio
use L1D_REPL:PMC0
use L1D_ALL_REF:PMC1
metric Runtime [s] = runtime
metric CPI = CPU_CLK_UNHALTED_CORE / INSTR_RETIRED_ANY
metric L1 miss rate = L1D_REPL / INSTR_RETIRED_ANY
metric L1 miss ratio = L1D_REPL / L1D_ALL_REF

group L2CACHE L2 Data cache miss rate/ratio
use L2_RQSTS_SELF_I_STATE:PMC0
use L2_RQSTS_THIS_CORE_ALL_MESI:PMC1
metric Runtime [s] = runtime
metric CPI = CPU_CLK_UNHALTED_CORE / INSTR_RETIRED_ANY
metric L2 miss rate = L2_RQSTS_SELF_I_STATE / INSTR_RETIRED_ANY
metric L2 miss ratio = L2_RQSTS_SELF_I_STATE / L2_RQSTS_THIS_CORE_ALL_MESI

group DATA Load to store ratio
use INST_RETIRED_LOADS:PMC0
use INST_RETIRED_STORES:PMC1
metric Runtime [s] = runtime
metric CPI = CPU_CLK_UNHALTED_CORE / INSTR_RETIRED_ANY
metric Load to Store ratio = INST_RETIRED_LOADS / INST_RETIRED_STORES

group BRANCH Branch prediction miss rate/ratio
use BR_INST_RETIRED_ANY:PMC0
use BR_INST_RETIRED_MISPRED:PMC1
metric Runtime [s] = runtime
metric CPI = CPU_CLK_UNHALTED_CORE / INSTR_RETIRED_ANY
metric Branch rate = BR_INST_RETIRED_ANY / INSTR_RETIRED_ANY
metric Branch misprediction rate = BR_INST_RETIRED_MISPRED / INSTR_RETIRED_ANY
metric Branch misprediction ratio = BR_INST_RETIRED_MISPRED / BR_INST_RETIRED_ANY

group TLB Translation lookaside buffer miss rate/ratio
use DTLB_MISSES_ANY:PMC0
use L1D_ALL_REF:PMC1
metric Runtime [s] = runtime
metric CPI = CPU_CLK_UNHALTED_CORE / INSTR_RETIRED_ANY
metric L1 DTLB miss rate = DTLB_MISSES_ANY / INSTR_RETIRED_ANY
metric L1 DTLB miss ratio = DTLB_MISSES_ANY / L1D_ALL_REF
)";

constexpr const char* kNehalemEvents = R"(
event INSTR_RETIRED_ANY                    code 0x00 umask 0x00 scope core counters FIXC0
event CPU_CLK_UNHALTED_CORE                code 0x00 umask 0x00 scope core counters FIXC1
event FP_COMP_OPS_EXE_SSE_FP_PACKED        code 0x10 umask 0x10 scope core counters PMC0,PMC1,PMC2,PMC3
event FP_COMP_OPS_EXE_SSE_FP_SCALAR        code 0x10 umask 0x20 scope core counters PMC0,PMC1,PMC2,PMC3
event FP_COMP_OPS_EXE_SSE_SINGLE_PRECISION code 0x10 umask 0x40 scope core counters PMC0,PMC1,PMC2,PMC3
event FP_COMP_OPS_EXE_SSE_DOUBLE_PRECISION code 0x10 umask 0x80 scope core counters PMC0,PMC1,PMC2,PMC3
event MEM_INST_RETIRED_LOADS               code 0x0B umask 0x01 scope core counters PMC0,PMC1,PMC2,PMC3
event MEM_INST_RETIRED_STORES              code 0x0B umask 0x02 scope core counters PMC0,PMC1,PMC2,PMC3
event L1D_ALL_REF_ANY                      code 0x43 umask 0x01 scope core counters PMC0,PMC1
event L1D_REPL                             code 0x51 umask 0x01 scope core counters PMC0,PMC1
event L1D_M_EVICT                          code 0x51 umask 0x04 scope core counters PMC0,PMC1
event L2_RQSTS_REFERENCES                  code 0x24 umask 0xFF scope core counters PMC0,PMC1,PMC2,PMC3
event L2_RQSTS_MISS                        code 0x24 umask 0xAA scope core counters PMC0,PMC1,PMC2,PMC3
event L2_LINES_IN_ANY                      code 0xF1 umask 0x07 scope core counters PMC0,PMC1,PMC2,PMC3
event L2_LINES_OUT_ANY                     code 0xF2 umask 0x0F scope core counters PMC0,PMC1,PMC2,PMC3
event BR_INST_RETIRED_ALL_BRANCHES         code 0xC4 umask 0x00 scope core counters PMC0,PMC1,PMC2,PMC3
event BR_MISP_RETIRED_ALL_BRANCHES         code 0xC5 umask 0x00 scope core counters PMC0,PMC1,PMC2,PMC3
event DTLB_MISSES_ANY                      code 0x49 umask 0x01 scope core counters PMC0,PMC1,PMC2,PMC3
event UNC_L3_HITS_ANY                      code 0x08 umask 0x03 scope uncore counters UPMC0,UPMC1,UPMC2,UPMC3,UPMC4,UPMC5,UPMC6,UPMC7
event UNC_L3_MISS_ANY                      code 0x09 umask 0x03 scope uncore counters UPMC0,UPMC1,UPMC2,UPMC3,UPMC4,UPMC5,UPMC6,UPMC7
event UNC_L3_LINES_IN_ANY                  code 0x0A umask 0x0F scope uncore counters UPMC0,UPMC1,UPMC2,UPMC3,UPMC4,UPMC5,UPMC6,UPMC7
event UNC_L3_LINES_OUT_ANY                 code 0x0B umask 0x1F scope uncore counters UPMC0,UPMC1,UPMC2,UPMC3,UPMC4,UPMC5,UPMC6,UPMC7
event UNC_QMC_NORMAL_READS_ANY             code 0x2C umask 0x07 scope uncore counters UPMC0,UPMC1,UPMC2,UPMC3,UPMC4,UPMC5,UPMC6,UPMC7
event UNC_QMC_WRITES_FULL_ANY              code 0x2F umask 0x07 scope uncore counters UPMC0,UPMC1,UPMC2,UPMC3,UPMC4,UPMC5,UPMC6,UPMC7
)";

constexpr const char* kNehalemGroups = R"(
group FLOPS_DP Double Precision MFlops/s
use FP_COMP_OPS_EXE_SSE_FP_PACKED:PMC0
use FP_COMP_OPS_EXE_SSE_FP_SCALAR:PMC1
use FP_COMP_OPS_EXE_SSE_SINGLE_PRECISION:PMC2
use FP_COMP_OPS_EXE_SSE_DOUBLE_PRECISION:PMC3
metric Runtime [s] = runtime
metric CPI = CPU_CLK_UNHALTED_CORE / INSTR_RETIRED_ANY
metric DP MFlops/s = 1.0E-06 * (2 * FP_COMP_OPS_EXE_SSE_FP_PACKED + FP_COMP_OPS_EXE_SSE_FP_SCALAR) / runtime

group FLOPS_SP Single Precision MFlops/s
use FP_COMP_OPS_EXE_SSE_FP_PACKED:PMC0
use FP_COMP_OPS_EXE_SSE_FP_SCALAR:PMC1
use FP_COMP_OPS_EXE_SSE_SINGLE_PRECISION:PMC2
use FP_COMP_OPS_EXE_SSE_DOUBLE_PRECISION:PMC3
metric Runtime [s] = runtime
metric CPI = CPU_CLK_UNHALTED_CORE / INSTR_RETIRED_ANY
metric SP MFlops/s = 1.0E-06 * (4 * FP_COMP_OPS_EXE_SSE_FP_PACKED + FP_COMP_OPS_EXE_SSE_FP_SCALAR) / runtime

group L2 L2 cache bandwidth in MBytes/s
use L1D_REPL:PMC0
use L1D_M_EVICT:PMC1
metric Runtime [s] = runtime
metric CPI = CPU_CLK_UNHALTED_CORE / INSTR_RETIRED_ANY
metric L2 bandwidth [MBytes/s] = 1.0E-06 * 64 * (L1D_REPL + L1D_M_EVICT) / runtime
metric L2 data volume [GBytes] = 1.0E-09 * 64 * (L1D_REPL + L1D_M_EVICT)

group L3 L3 cache bandwidth in MBytes/s
use L2_LINES_IN_ANY:PMC0
use L2_LINES_OUT_ANY:PMC1
metric Runtime [s] = runtime
metric CPI = CPU_CLK_UNHALTED_CORE / INSTR_RETIRED_ANY
metric L3 bandwidth [MBytes/s] = 1.0E-06 * 64 * (L2_LINES_IN_ANY + L2_LINES_OUT_ANY) / runtime
metric L3 data volume [GBytes] = 1.0E-09 * 64 * (L2_LINES_IN_ANY + L2_LINES_OUT_ANY)

group MEM Main memory bandwidth in MBytes/s (memory controller)
use UNC_QMC_NORMAL_READS_ANY:UPMC0
use UNC_QMC_WRITES_FULL_ANY:UPMC1
metric Runtime [s] = runtime
metric CPI = CPU_CLK_UNHALTED_CORE / INSTR_RETIRED_ANY
metric Memory bandwidth [MBytes/s] = 1.0E-06 * 64 * (UNC_QMC_NORMAL_READS_ANY + UNC_QMC_WRITES_FULL_ANY) / runtime
metric Memory data volume [GBytes] = 1.0E-09 * 64 * (UNC_QMC_NORMAL_READS_ANY + UNC_QMC_WRITES_FULL_ANY)

group MEM_L3 Main memory bandwidth in MBytes/s (L3 line allocations and victims)
use UNC_L3_LINES_IN_ANY:UPMC0
use UNC_L3_LINES_OUT_ANY:UPMC1
metric Runtime [s] = runtime
metric CPI = CPU_CLK_UNHALTED_CORE / INSTR_RETIRED_ANY
metric Memory bandwidth [MBytes/s] = 1.0E-06 * 64 * (UNC_L3_LINES_IN_ANY + UNC_L3_LINES_OUT_ANY) / runtime
metric Memory data volume [GBytes] = 1.0E-09 * 64 * (UNC_L3_LINES_IN_ANY + UNC_L3_LINES_OUT_ANY)

group CACHE L1 Data cache miss rate/ratio
use L1D_REPL:PMC0
use L1D_ALL_REF_ANY:PMC1
metric Runtime [s] = runtime
metric CPI = CPU_CLK_UNHALTED_CORE / INSTR_RETIRED_ANY
metric L1 miss rate = L1D_REPL / INSTR_RETIRED_ANY
metric L1 miss ratio = L1D_REPL / L1D_ALL_REF_ANY

group L2CACHE L2 Data cache miss rate/ratio
use L2_RQSTS_MISS:PMC0
use L2_RQSTS_REFERENCES:PMC1
metric Runtime [s] = runtime
metric CPI = CPU_CLK_UNHALTED_CORE / INSTR_RETIRED_ANY
metric L2 miss rate = L2_RQSTS_MISS / INSTR_RETIRED_ANY
metric L2 miss ratio = L2_RQSTS_MISS / L2_RQSTS_REFERENCES

group L3CACHE L3 Data cache miss rate/ratio
use UNC_L3_MISS_ANY:UPMC0
use UNC_L3_HITS_ANY:UPMC1
metric Runtime [s] = runtime
metric CPI = CPU_CLK_UNHALTED_CORE / INSTR_RETIRED_ANY
metric L3 miss rate = UNC_L3_MISS_ANY / INSTR_RETIRED_ANY
metric L3 miss ratio = UNC_L3_MISS_ANY / (UNC_L3_HITS_ANY + UNC_L3_MISS_ANY)

group DATA Load to store ratio
use MEM_INST_RETIRED_LOADS:PMC0
use MEM_INST_RETIRED_STORES:PMC1
metric Runtime [s] = runtime
metric CPI = CPU_CLK_UNHALTED_CORE / INSTR_RETIRED_ANY
metric Load to Store ratio = MEM_INST_RETIRED_LOADS / MEM_INST_RETIRED_STORES

group BRANCH Branch prediction miss rate/ratio
use BR_INST_RETIRED_ALL_BRANCHES:PMC0
use BR_MISP_RETIRED_ALL_BRANCHES:PMC1
metric Runtime [s] = runtime
metric CPI = CPU_CLK_UNHALTED_CORE / INSTR_RETIRED_ANY
metric Branch rate = BR_INST_RETIRED_ALL_BRANCHES / INSTR_RETIRED_ANY
metric Branch misprediction rate = BR_MISP_RETIRED_ALL_BRANCHES / INSTR_RETIRED_ANY
metric Branch misprediction ratio = BR_MISP_RETIRED_ALL_BRANCHES / BR_INST_RETIRED_ALL_BRANCHES

group TLB Translation lookaside buffer miss rate/ratio
use DTLB_MISSES_ANY:PMC0
use L1D_ALL_REF_ANY:PMC1
metric Runtime [s] = runtime
metric CPI = CPU_CLK_UNHALTED_CORE / INSTR_RETIRED_ANY
metric L1 DTLB miss rate = DTLB_MISSES_ANY / INSTR_RETIRED_ANY
metric L1 DTLB miss ratio = DTLB_MISSES_ANY / L1D_ALL_REF_ANY
)";

constexpr msr::Address kPerfEvtSel0 = 0x186;
constexpr msr::Address kPmc0 = 0xC1;
constexpr msr::Address kFixedCtr0 = 0x309;
constexpr msr::Address kFixedCtrCtrl = 0x38D;
constexpr msr::Address kGlobalCtrl = 0x38F;
constexpr msr::Address kUncoreGlobalCtrl = 0x391;
constexpr msr::Address kUncorePmc0 = 0x3B0;
constexpr msr::Address kUncorePerfEvtSel0 = 0x3C0;

std::vector<CounterSlot> core_slots(unsigned programmable, unsigned width) {
  std::vector<CounterSlot> slots;
  for (unsigned i = 0; i < 2; ++i) {
    slots.push_back({"FIXC" + std::to_string(i), SlotKind::Fixed, 32 + i, kFixedCtrCtrl, kFixedCtr0 + i, width});
  }
  for (unsigned i = 0; i < programmable; ++i) {
    slots.push_back({"PMC" + std::to_string(i), SlotKind::Programmable, i, kPerfEvtSel0 + i, kPmc0 + i, width});
  }
  return slots;
}

}  // namespace

const Architecture& core2() {
  static const Architecture arch =
      build_architecture("Intel Core 2", core_slots(2, 40), kCore2Events, kCore2Groups, kFixedCtrCtrl, kGlobalCtrl,
                         std::nullopt);
  return arch;
}

const Architecture& nehalem() {
  static const Architecture arch = [] {
    auto slots = core_slots(4, 48);
    for (unsigned i = 0; i < 8; ++i) {
      slots.push_back({"UPMC" + std::to_string(i), SlotKind::Uncore, i, kUncorePerfEvtSel0 + i, kUncorePmc0 + i, 48});
    }
    return build_architecture("Intel Nehalem/Westmere", std::move(slots), kNehalemEvents, kNehalemGroups,
                              kFixedCtrCtrl, kGlobalCtrl, kUncoreGlobalCtrl);
  }();
  return arch;
}

}  // namespace perfkit::events
