/* C interface to the icprl workbench. All commands are driven by a flat
 * key=value config; informational output goes to stdout. Functions return
 * ICPRL_OK on success, ICPRL_ERR_USAGE for bad keys, values, or incompatible
 * combinations, and ICPRL_ERR_RUNTIME for IO or training failures. The
 * failing call's message is available from icprl_last_error() until the next
 * call on the same thread. */
#ifndef ICPRL_H
#define ICPRL_H

#include <stddef.h>

#ifdef __cplusplus
extern "C" {
#endif

#define ICPRL_OK 0
#define ICPRL_ERR_RUNTIME 1
#define ICPRL_ERR_USAGE 2

typedef struct icprl_config icprl_config;

const char* icprl_version(void);

icprl_config* icprl_config_new(void);
void icprl_config_free(icprl_config* cfg);

/* Reads "key = value" lines ('#' comments, blank lines skipped) into cfg.
 * Later values win, so call this before icprl_config_set overrides. */
int icprl_config_load_file(icprl_config* cfg, const char* path);
int icprl_config_set(icprl_config* cfg, const char* key, const char* value);

/* Copies the value for key into buf as a NUL-terminated string. Fails with
 * ICPRL_ERR_USAGE if the key is unset or cap is too small. */
int icprl_config_get(const icprl_config* cfg, const char* key, char* buf, size_t cap);

/* Generate a synthetic preference corpus (train + test split). */
int icprl_gen(const icprl_config* cfg);
/* Pretrain one framework on a corpus and write a checkpoint directory. */
int icprl_train(const icprl_config* cfg);
/* Roll out a framework or baseline on held-out tasks and write a report. */
int icprl_eval(const icprl_config* cfg);
/* Replay a named end-to-end suite with pinned seeds. overrides may be NULL;
 * allowed override keys: out, workers, seed, smoke. */
int icprl_repro(const char* suite, const icprl_config* overrides);

/* Copies the newline-joined suite names into buf. */
int icprl_suites(char* buf, size_t cap);

/* Message from the last failing call on this thread, or "" if none. */
const char* icprl_last_error(void);

#ifdef __cplusplus
}
#endif

#endif
