/* Public C interface to the mvboost pipeline.
 *
 * All pipeline functionality is reachable through this flat API: opaque
 * handles, integer status codes, UTF-8 paths. Functions return MVB_OK (0) on
 * success; on failure they return a nonzero status and leave a human-readable
 * message retrievable via mvb_last_error() (thread-local).
 *
 * Status codes double as CLI exit codes:
 *   1  bad argument to a call
 *   2  configuration problem (file, key, value, resolution mismatch)
 *   3  data problem (missing/corrupt artifact, hash mismatch)
 *   4  numerical abort (NaN/Inf during training)
 */
#ifndef MVBOOST_H
#define MVBOOST_H

#ifdef __cplusplus
extern "C" {
#endif

#define MVB_API __attribute__((visibility("default")))

typedef int mvb_status;

enum {
    MVB_OK = 0,
    MVB_ERR_PARAM = 1,
    MVB_ERR_CONFIG = 2,
    MVB_ERR_DATA = 3,
    MVB_ERR_NUMERIC = 4,
};

/* Parsed configuration (opaque). */
typedef struct mvb_config mvb_config;

/* ---- configuration ---------------------------------------------------- */

/* Built-in defaults for every key. */
MVB_API mvb_status mvb_config_create(mvb_config** out);
/* Defaults overlaid with a config file. Unknown keys are rejected. */
MVB_API mvb_status mvb_config_load(const char* path, mvb_config** out);
/* Override one key, e.g. mvb_config_set(cfg, "refine.strength", "0.9"). */
MVB_API mvb_status mvb_config_set(mvb_config* cfg, const char* key, const char* value);
/* Fetch a value as text. buf receives a NUL-terminated string. */
MVB_API mvb_status mvb_config_get(const mvb_config* cfg, const char* key, char* buf, int buf_len);
/* Canonical 16-hex-digit hash of the full configuration. buf_len >= 17. */
MVB_API mvb_status mvb_config_hash(const mvb_config* cfg, char* buf, int buf_len);
MVB_API void mvb_config_destroy(mvb_config* cfg);

/* ---- pipeline commands ------------------------------------------------ */

/* Generate `count` synthetic scenes (scene file + reference renders each)
 * under out_dir. Refuses a non-empty out_dir unless force != 0. */
MVB_API mvb_status mvb_gen_scenes(const mvb_config* cfg, int count, const char* out_dir, int force);

/* Train the base reconstructor from scratch and write its checkpoint. */
MVB_API mvb_status mvb_pretrain_base(const mvb_config* cfg, const char* out_checkpoint);

/* Build the refined training set from scenes_dir into out_dir, running the
 * scenes through the base model loaded from base_checkpoint. Resumes (skips
 * finished scenes) when out_dir already holds a compatible build;
 * force != 0 rebuilds from scratch. */
MVB_API mvb_status mvb_build_dataset(const mvb_config* cfg, const char* base_checkpoint,
                                     const char* scenes_dir, const char* out_dir, int force);

/* Adapter training on a built dataset (base weights stay frozen); writes the
 * adapter checkpoint. Refuses a dataset built under a different
 * data-affecting configuration or base model. */
MVB_API mvb_status mvb_train(const mvb_config* cfg, const char* base_checkpoint,
                             const char* dataset_dir, const char* out_checkpoint);

/* Evaluate base vs adapted model on the scenes under scenes_dir; writes a
 * CSV report (per-scene paired rows) plus a .summary.txt next to it. */
MVB_API mvb_status mvb_eval(const mvb_config* cfg, const char* base_checkpoint,
                            const char* adapter_checkpoint, const char* scenes_dir,
                            const char* report_path);

/* Refinement-strength sweep over freshly generated scenes; writes a CSV
 * table (strength,psnr,ssim,perc) plus a .summary.txt flagging the best
 * strength. strengths may be NULL to use the built-in default grid. */
MVB_API mvb_status mvb_ablate_strength(const mvb_config* cfg, const char* base_checkpoint,
                                       const double* strengths, int count,
                                       const char* report_path);

/* Single-view post-optimization: find the input's pose, then fit a gated
 * residual field. input_png must live inside a scene directory produced by
 * mvb_gen_scenes. adapter_checkpoint may be NULL to run the plain base
 * model. Writes the optimized scene, before/after renders and a drift
 * report. */
MVB_API mvb_status mvb_optimize_view(const mvb_config* cfg, const char* base_checkpoint,
                                     const char* adapter_checkpoint, const char* input_png,
                                     const char* out_dir);

/* ---- misc ------------------------------------------------------------- */

/* Message for the most recent failure on this thread ("" if none). */
MVB_API const char* mvb_last_error(void);
MVB_API const char* mvb_version(void);

#ifdef __cplusplus
}
#endif

#endif /* MVBOOST_H */
