/* tslint:disable */
/* eslint-disable */

export class Demo {
    free(): void;
    [Symbol.dispose](): void;
    lsr(): number;
    constructor(pupil_samples: number);
    psf(coded: boolean): Image;
    restore(gamma: number): Image;
    simulate(alpha_l: number, coded: boolean, seed: number): Image;
    truth(): Image | undefined;
}

/**
 * 8-bit RGBA image ready for `ImageData`, plus a scalar for the caption.
 */
export class Image {
    private constructor();
    free(): void;
    [Symbol.dispose](): void;
    readonly height: number;
    readonly rgba: Uint8Array;
    /**
     * LSR for a PSF, saturated fraction for a frame, PSNR (dB) for a restoration.
     */
    readonly value: number;
    readonly width: number;
}

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_demo_free: (a: number, b: number) => void;
    readonly __wbg_image_free: (a: number, b: number) => void;
    readonly demo_lsr: (a: number) => number;
    readonly demo_new: (a: number) => [number, number, number];
    readonly demo_psf: (a: number, b: number) => [number, number, number];
    readonly demo_restore: (a: number, b: number) => [number, number, number];
    readonly demo_simulate: (a: number, b: number, c: number, d: number) => [number, number, number];
    readonly demo_truth: (a: number) => number;
    readonly image_height: (a: number) => number;
    readonly image_rgba: (a: number) => [number, number];
    readonly image_value: (a: number) => number;
    readonly image_width: (a: number) => number;
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __externref_table_dealloc: (a: number) => void;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
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
