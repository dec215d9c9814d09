#ifndef PAYSIM_PAYSIM_H
#define PAYSIM_PAYSIM_H

/* C interface to the payload simulator. Every call returns a paysim_status;
 * on failure paysim_last_error() describes the problem for the calling
 * thread until its next call into the library. */

#include <stddef.h>
#include <stdint.h>

#if defined(PAYSIM_BUILDING_LIBRARY)
#define PAYSIM_API __attribute__((visibility("default")))
#else
#define PAYSIM_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum paysim_status {
    PAYSIM_OK = 0,
    PAYSIM_ERR_INVALID_ARGUMENT = 1,
    PAYSIM_ERR_PAYLOAD_TOO_LARGE,
    PAYSIM_ERR_MALFORMED_FRAME,
    PAYSIM_ERR_CHECKSUM_MISMATCH,
    PAYSIM_ERR_INVALID_DESCRIPTOR,
    PAYSIM_ERR_PIPE_NOT_ACTIVE,
    PAYSIM_ERR_CAPABILITY_VIOLATION,
    PAYSIM_ERR_PORT_BUSY,
    PAYSIM_ERR_IDENTITY_MISMATCH,
    PAYSIM_ERR_UNKNOWN_SESSION,
    PAYSIM_ERR_RATE_TOO_HIGH,
    PAYSIM_ERR_STEREO_REQUIRES_BULK,
    PAYSIM_ERR_OUT_OF_RANGE,
    PAYSIM_ERR_NEGOTIATION_FAILED,
    PAYSIM_ERR_BULK_PROVISION_FAILED,
    PAYSIM_ERR_PIPE_FAULTED,
    PAYSIM_ERR_LINK_TIMEOUT,
    PAYSIM_ERR_MIXED_FRAMES,
    PAYSIM_ERR_INCONSISTENT_PACKETS,
    PAYSIM_ERR_OUT_OF_BOUNDS,
    PAYSIM_ERR_EMPTY_RUN,
    PAYSIM_ERR_INVALID_SCENARIO,
    PAYSIM_ERR_PORT_IN_USE,
    PAYSIM_ERR_IO,
    PAYSIM_ERR_INTERNAL = 100
} paysim_status;

typedef enum paysim_port { PAYSIM_PORT_EPORT = 0, PAYSIM_PORT_SKYPORT = 1 } paysim_port;

typedef enum paysim_capability {
    PAYSIM_CAP_POWER_TELEMETRY = 0,
    PAYSIM_CAP_FLIGHT_PAYLOAD_CONTROL = 1,
    PAYSIM_CAP_SENSOR_ACCESS = 2,
    PAYSIM_CAP_CAMERA_FEEDS = 3,
    PAYSIM_CAP_STREAM_TO_CONTROLLER = 4
} paysim_capability;

typedef struct paysim_scenario paysim_scenario;
typedef struct paysim_server paysim_server;

typedef struct paysim_run_options {
    int has_seed;
    uint64_t seed;
    int has_until;
    double until_s;
    /* Optional NDJSON event log destination; NULL to skip. */
    const char* events_path;
} paysim_run_options;

typedef struct paysim_run_outcome {
    /* 0 clean, 2 fault. */
    int exit_code;
    uint64_t frames_sent;
    uint64_t frames_delivered;
    double mean_latency_ms; /* NaN when nothing was delivered */
    double bitrate_bps;
} paysim_run_outcome;

typedef void (*paysim_quirk_callback)(const char* id, const char* name, int passed, const char* detail,
                                      void* user);

PAYSIM_API const char* paysim_version(void);
PAYSIM_API const char* paysim_last_error(void);
PAYSIM_API const char* paysim_status_name(paysim_status status);

PAYSIM_API paysim_status paysim_scenario_load(const char* path, paysim_scenario** out);
PAYSIM_API paysim_status paysim_scenario_load_string(const char* json, size_t len, paysim_scenario** out);
PAYSIM_API void paysim_scenario_free(paysim_scenario* scenario);

/* Runs to completion and writes the metrics report. options may be NULL. */
PAYSIM_API paysim_status paysim_run(const paysim_scenario* scenario, const char* report_path,
                                    const paysim_run_options* options, paysim_run_outcome* outcome);
/* Same run, report returned in a buffer released with paysim_string_free. */
PAYSIM_API paysim_status paysim_run_to_string(const paysim_scenario* scenario,
                                              const paysim_run_options* options, char** report_json,
                                              paysim_run_outcome* outcome);
PAYSIM_API void paysim_string_free(char* s);

PAYSIM_API paysim_status paysim_quirks_run(paysim_quirk_callback callback, void* user, int* all_passed);

/* port 0 picks a free port; time_scale <= 0 means real time. */
PAYSIM_API paysim_status paysim_server_start(const paysim_scenario* scenario, const char* bind_address,
                                             uint16_t port, double time_scale, paysim_server** out);
PAYSIM_API uint16_t paysim_server_port(const paysim_server* server);
/* Stops serving, joins the server thread and frees the handle. */
PAYSIM_API void paysim_server_stop(paysim_server* server);

PAYSIM_API paysim_status paysim_vectors_write(const char* path);

PAYSIM_API int paysim_check_capability(paysim_port port, paysim_capability capability);
PAYSIM_API paysim_status paysim_map_click(double u, double v, int* x, int* y);
PAYSIM_API uint16_t paysim_crc16(const uint8_t* data, size_t len);
/* Writes the encoded frame into out (capacity out_cap); *out_len receives its size. */
PAYSIM_API paysim_status paysim_encode_serial(uint8_t msg_type, uint16_t seq, const uint8_t* payload,
                                              size_t payload_len, uint8_t* out, size_t out_cap, size_t* out_len);

#ifdef __cplusplus
}
#endif

#endif
