/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_demo_free: (a: number, b: number) => void;
export const __wbg_get_localization_angular_error: (a: number) => number;
export const __wbg_get_localization_detected: (a: number) => number;
export const __wbg_get_localization_dropped: (a: number) => number;
export const __wbg_get_localization_inliers: (a: number) => number;
export const __wbg_get_localization_mean_detection_error: (a: number) => number;
export const __wbg_get_localization_position_error: (a: number) => number;
export const __wbg_get_localization_success: (a: number) => number;
export const __wbg_localization_free: (a: number, b: number) => void;
export const __wbg_set_localization_angular_error: (a: number, b: number) => void;
export const __wbg_set_localization_detected: (a: number, b: number) => void;
export const __wbg_set_localization_dropped: (a: number, b: number) => void;
export const __wbg_set_localization_inliers: (a: number, b: number) => void;
export const __wbg_set_localization_mean_detection_error: (a: number, b: number) => void;
export const __wbg_set_localization_position_error: (a: number, b: number) => void;
export const __wbg_set_localization_success: (a: number, b: number) => void;
export const cost_table: (a: number, b: number, c: number, d: number, e: number) => [number, number, number, number];
export const demo_camera_count: (a: number) => number;
export const demo_height: (a: number) => number;
export const demo_landmark_count: (a: number) => number;
export const demo_localize: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number, number];
export const demo_new: (a: number, b: number, c: number, d: number, e: number) => [number, number, number];
export const demo_render: (a: number, b: number, c: number, d: number) => [number, number, number, number];
export const demo_width: (a: number) => number;
export const localization_image: (a: number) => [number, number];
export const __wbindgen_externrefs: WebAssembly.Table;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_malloc: (a: number, b: number) => number;
export const __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
export const __wbindgen_start: () => void;
