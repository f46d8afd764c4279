/* tslint:disable */
/* eslint-disable */

/**
 * A generated scene with its landmarks and rendered ground-truth views.
 */
export class Demo {
    free(): void;
    [Symbol.dispose](): void;
    camera_count(): number;
    height(): number;
    landmark_count(): number;
    /**
     * Corrupts the view's maps, detects landmarks and estimates the pose.
     */
    localize(camera: number, label_flip_prob: number, vote_angle_sigma: number, occlusion_block_frac: number, seed: number): Localization;
    /**
     * `shape` is `box-room`, `planar-wall` or `random-blobs`.
     */
    constructor(shape: string, point_density: number, patch_size: number, seed: number);
    /**
     * RGBA pixels of the ground-truth maps; `mode` is `labels` or `votes`.
     */
    render(camera: number, mode: string): Uint8Array;
    width(): number;
}

/**
 * Outcome of one corrupted-map localization.
 */
export class Localization {
    private constructor();
    free(): void;
    [Symbol.dispose](): void;
    /**
     * RGBA overlay: dimmed corrupted labels, detections in green, true
     * projections in red.
     */
    image(): Uint8Array;
    /**
     * Degrees; infinite on failure.
     */
    angular_error: number;
    detected: number;
    dropped: number;
    inliers: number;
    /**
     * Pixels; NaN when nothing was detected.
     */
    mean_detection_error: number;
    /**
     * Meters; infinite on failure.
     */
    position_error: number;
    success: boolean;
}

/**
 * Per-stage FLOP and memory table for cross entropy against the prototype
 * triplet loss.
 */
export function cost_table(height: number, width: number, classes: number, dim: number, active: number): string;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_demo_free: (a: number, b: number) => void;
    readonly __wbg_get_localization_angular_error: (a: number) => number;
    readonly __wbg_get_localization_detected: (a: number) => number;
    readonly __wbg_get_localization_dropped: (a: number) => number;
    readonly __wbg_get_localization_inliers: (a: number) => number;
    readonly __wbg_get_localization_mean_detection_error: (a: number) => number;
    readonly __wbg_get_localization_position_error: (a: number) => number;
    readonly __wbg_get_localization_success: (a: number) => number;
    readonly __wbg_localization_free: (a: number, b: number) => void;
    readonly __wbg_set_localization_angular_error: (a: number, b: number) => void;
    readonly __wbg_set_localization_detected: (a: number, b: number) => void;
    readonly __wbg_set_localization_dropped: (a: number, b: number) => void;
    readonly __wbg_set_localization_inliers: (a: number, b: number) => void;
    readonly __wbg_set_localization_mean_detection_error: (a: number, b: number) => void;
    readonly __wbg_set_localization_position_error: (a: number, b: number) => void;
    readonly __wbg_set_localization_success: (a: number, b: number) => void;
    readonly cost_table: (a: number, b: number, c: number, d: number, e: number) => [number, number, number, number];
    readonly demo_camera_count: (a: number) => number;
    readonly demo_height: (a: number) => number;
    readonly demo_landmark_count: (a: number) => number;
    readonly demo_localize: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number, number];
    readonly demo_new: (a: number, b: number, c: number, d: number, e: number) => [number, number, number];
    readonly demo_render: (a: number, b: number, c: number, d: number) => [number, number, number, number];
    readonly demo_width: (a: number) => number;
    readonly localization_image: (a: number) => [number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __externref_table_dealloc: (a: number) => void;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
    readonly __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
    readonly __wbindgen_start: () => void;
}

export type SyncInitInput = BufferSource | WebAssembly.Module;

/**
 * Instantiates the given `module`, which can either be bytes or
 * a precompiled `WebAssembly.Module`.
 *
 * @param {{ module: SyncInitInput }} module - Passing `SyncInitInput` directly is deprecated.
 *
 * @returns {InitOutput}
 */
export function initSync(module: { module: SyncInitInput } | SyncInitInput): InitOutput;

/**
 * If `module_or_path` is {RequestInfo} or {URL}, makes a request and
 * for everything else, calls `WebAssembly.instantiate` directly.
 *
 * @param {{ module_or_path: InitInput | Promise<InitInput> }} module_or_path - Passing `InitInput` directly is deprecated.
 *
 * @returns {Promise<InitOutput>}
 */
export default function __wbg_init (module_or_path?: { module_or_path: InitInput | Promise<InitInput> } | InitInput | Promise<InitInput>): Promise<InitOutput>;
