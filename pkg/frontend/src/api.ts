// Typed client for the edit service. The fetch implementation is injected
// so tests can replay recorded sessions without a server.

export interface HealthInfo {
    status: string;
    bundle_version: number;
    J: number;
    latent_dim: number;
}

export interface MetricInfo {
    name: string;
    required_roles: string[];
    mean: number | null;
    std: number | null;
    trained: boolean;
}

export interface ClipSummary {
    id: string;
    frames: number;
    frame_rate: number;
}

export interface ClipDetail {
    id: string;
    frame_rate: number;
    J: number;
    parents: number[];
    frames: number[][];
    metrics: Record<string, (number | null)[]>;
}

export interface TargetSpec {
    metric: string;
    value: number; // radians on the wire
}

export interface Readout {
    name: string;
    before: number;
    after: number;
}

export interface PoseEditResponse {
    pose: number[];
    readouts: Readout[];
}

export interface ReadoutSeries {
    name: string;
    before: (number | null)[];
    after: (number | null)[];
}

export interface ClipEditResponse {
    id: string;
    frame_rate: number;
    curve: number[];
    frames: number[][];
    readouts: ReadoutSeries[];
}

export type CurveShape = 'hat' | 'sine';

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class ApiError extends Error {
    constructor(public status: number, message: string) {
        super(message);
    }
}

export class ApiClient {
    constructor(
        private readonly base: string = '',
        private readonly fetchImpl: FetchLike = (url, init) => fetch(url, init)
    ) {}

    private async request<T>(path: string, init?: RequestInit): Promise<T> {
        const response = await this.fetchImpl(this.base + path, init);
        const text = await response.text();
        if (!response.ok) {
            let message = text;
            try {
                message = JSON.parse(text).message ?? text;
            } catch {
                // non-JSON error body; keep raw text
            }
            throw new ApiError(response.status, message);
        }
        return JSON.parse(text) as T;
    }

    health(): Promise<HealthInfo> {
        return this.request<HealthInfo>('/api/health');
    }

    metrics(): Promise<MetricInfo[]> {
        return this.request<MetricInfo[]>('/api/metrics');
    }

    clips(): Promise<ClipSummary[]> {
        return this.request<ClipSummary[]>('/api/clips');
    }

    clip(id: string): Promise<ClipDetail> {
        return this.request<ClipDetail>(`/api/clips/${encodeURIComponent(id)}`);
    }

    editPose(pose: number[], targets: TargetSpec[]): Promise<PoseEditResponse> {
        return this.request<PoseEditResponse>('/api/edit/pose', {
            method: 'POST',
            headers: { 'content-type': 'application/json' },
            body: JSON.stringify({ pose, targets }),
        });
    }

    editClip(
        clipId: string,
        peakFrame: number,
        radius: number,
        shape: CurveShape,
        targets: TargetSpec[]
    ): Promise<ClipEditResponse> {
        return this.request<ClipEditResponse>('/api/edit/clip', {
            method: 'POST',
            headers: { 'content-type': 'application/json' },
            body: JSON.stringify({
                clip_id: clipId,
                peak_frame: peakFrame,
                radius,
                shape,
                targets,
            }),
        });
    }
}
