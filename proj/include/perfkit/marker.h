#ifndef PERFKIT_MARKER_H
#define PERFKIT_MARKER_H

/* Named-region instrumentation. Without the environment set up by
 * `perfkit perfctr -m` every call succeeds and records nothing. Functions
 * return 0 on success and -1 on error unless noted. */

#ifdef __cplusplus
extern "C" {
#endif

int perfkit_marker_init(int number_of_threads, int number_of_regions);
/* Returns the dense region id, or -1. */
int perfkit_marker_register_region(const char* name);
int perfkit_marker_start_region(int thread_id, int core_id);
int perfkit_marker_stop_region(int thread_id, int core_id, int region_id);
int perfkit_marker_close(void);
/* The processor the calling thread runs on. */
int perfkit_get_processor_id(void);
/* Message for the most recent failed call on this thread, or "". */
const char* perfkit_marker_last_error(void);

#ifdef __cplusplus
}
#endif

#endif
