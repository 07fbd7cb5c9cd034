/* tslint:disable */
/* eslint-disable */

/**
 * Exploitability in mA/g of the average strategy after every `every`
 * iterations, as `[t, e, t, e, ...]`.
 */
export function cfr_curve(game: string, linear: boolean, alternating: boolean, iterations: number, every: number): Float64Array;

/**
 * Fraction of `trials` in which each of `stream_len` items survived in a
 * reservoir of `capacity`.
 */
export function reservoir_retention(capacity: number, stream_len: number, trials: number, seed: number): Float64Array;

/**
 * [`trajectory_rows`] as tab-separated lines for the page.
 */
export function trajectory_vs_explicit(iterations: number, episodes: number, seed: number): string;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly cfr_curve: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number, number, number];
    readonly reservoir_retention: (a: number, b: number, c: number, d: number) => [number, number, number, number];
    readonly trajectory_vs_explicit: (a: number, b: number, c: number) => [number, number, number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
    readonly __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
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
