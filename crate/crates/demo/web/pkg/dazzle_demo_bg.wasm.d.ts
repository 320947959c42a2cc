/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_demo_free: (a: number, b: number) => void;
export const __wbg_image_free: (a: number, b: number) => void;
export const demo_lsr: (a: number) => number;
export const demo_new: (a: number) => [number, number, number];
export const demo_psf: (a: number, b: number) => [number, number, number];
export const demo_restore: (a: number, b: number) => [number, number, number];
export const demo_simulate: (a: number, b: number, c: number, d: number) => [number, number, number];
export const demo_truth: (a: number) => number;
export const image_height: (a: number) => number;
export const image_rgba: (a: number) => [number, number];
export const image_value: (a: number) => number;
export const image_width: (a: number) => number;
export const __wbindgen_externrefs: WebAssembly.Table;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_start: () => void;
