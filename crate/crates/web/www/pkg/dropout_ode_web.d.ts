/* tslint:disable */
/* eslint-disable */

/**
 * A dropout network trained on Sprott B data from `(1, 1, 1)` over `[0, 10]`.
 */
export class Model {
    free(): void;
    [Symbol.dispose](): void;
    /**
     * Monte-Carlo dropout envelope on `n` intervals of `[0, t_end]`.
     */
    envelope(u0: Float64Array, t_end: number, n: number, trajectories: number, c: number, seed: bigint): Float64Array;
    /**
     * Mean over training states of `‖E[f(u)] − f_true(u)‖₂`.
     */
    field_error(): number;
    constructor(h: number, r: number, outer_iters: number, seed: bigint);
    readonly final_loss: number;
    readonly rate: number;
}

/**
 * Sprott B sampled every `h` on `[0, t_end]`.
 */
export function simulate(u0: Float64Array, t_end: number, h: number): Float64Array;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_model_free: (a: number, b: number) => void;
    readonly model_envelope: (a: number, b: number, c: number, d: number, e: number, f: number, g: number, h: bigint) => [number, number, number, number];
    readonly model_field_error: (a: number) => number;
    readonly model_final_loss: (a: number) => number;
    readonly model_new: (a: number, b: number, c: number, d: bigint) => [number, number, number];
    readonly model_rate: (a: number) => number;
    readonly simulate: (a: number, b: number, c: number, d: number) => [number, number, number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
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
