/** Wire types mirroring the HTTP API responses. */
export {};
